//! Named verification suites: seeded property checks over the algebra
//! layers plus the oracle-agreement suites that compare the production
//! elimination against the brute-force lattice solver. Each suite returns a
//! machine-readable report; the CLI's `verify` command prints it and maps
//! `passed` to the exit code.

use crate::fixtures::{
    self, random_interface_case, random_mirror_case, random_two_bounce_case, OneBounceCase,
    TwoBounceCase,
};
use crate::oracle::{brute_force_roots, compare_solution_sets, OracleConfig};
use crate::poly::{BivariatePolynomial, UnivariatePolynomial};
use crate::polynomialize::SpecularSystem;
use crate::resultant::{bezout_matrix, det_eval, expand_determinant, sylvester_matrix};
use crate::rootfind::{back_substitute, det_zero_scan, isolate_roots, newton_polish_2d, SolverConfig};
use crate::scene::BarycentricCoord;
use crate::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The named suites exposed by `specular verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Poly,
    Resultant,
    Rootfind,
    OracleR,
    OracleT,
    OracleRr,
}

impl Suite {
    pub fn all() -> [Suite; 6] {
        [
            Suite::Poly,
            Suite::Resultant,
            Suite::Rootfind,
            Suite::OracleR,
            Suite::OracleT,
            Suite::OracleRr,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Poly => "poly",
            Suite::Resultant => "resultant",
            Suite::Rootfind => "rootfind",
            Suite::OracleR => "oracle-R",
            Suite::OracleT => "oracle-T",
            Suite::OracleRr => "oracle-RR",
        }
    }

    pub fn from_name(s: &str) -> Option<Suite> {
        Suite::all().into_iter().find(|x| x.name() == s)
    }
}

/// One named check inside a suite.
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of one suite run.
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckResult>,
    /// Informational lines (logged allowances, miss diagnostics).
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Text form: one suite line, one line per check, indented notes.
    pub fn render(&self) -> String {
        let mut s = format!(
            "suite {}: {}\n",
            self.suite.name(),
            if self.passed() { "PASS" } else { "FAIL" }
        );
        for c in &self.checks {
            s.push_str(&format!(
                "  check {}: {} ({})\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.detail
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }
}

pub fn run_suite(suite: Suite) -> SuiteReport {
    match suite {
        Suite::Poly => poly_suite(),
        Suite::Resultant => resultant_suite(),
        Suite::Rootfind => rootfind_suite(),
        Suite::OracleR => oracle_r_suite(),
        Suite::OracleT => oracle_t_suite(),
        Suite::OracleRr => oracle_rr_suite(),
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        detail,
    }
}

// --- algebra suites ---

fn random_univariate<R: Rng>(rng: &mut R, deg: usize) -> UnivariatePolynomial {
    UnivariatePolynomial::new((0..=deg).map(|_| rng.gen_range(-10.0..10.0)).collect())
}

fn random_bivariate<R: Rng>(rng: &mut R, deg: usize) -> BivariatePolynomial {
    let mut p = BivariatePolynomial::zero(deg);
    for i in 0..=deg {
        for j in 0..=(deg - i) {
            p.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    p
}

fn poly_suite() -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x70);
    let mut checks = Vec::new();

    // Horner evaluation against the naive power sum
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let deg = rng.gen_range(1..=12);
        let p = random_univariate(&mut rng, deg);
        let x: f64 = rng.gen_range(-2.0..2.0);
        let naive: f64 = p
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, &c)| c * x.powi(i as i32))
            .sum();
        let scale: f64 = p.coeffs().iter().map(|c| c.abs()).sum::<f64>() * x.abs().max(1.0).powi(12);
        worst = worst.max((p.eval(x) - naive).abs() / scale.max(1.0));
    }
    checks.push(check(
        "horner-vs-naive",
        worst < 1e-12,
        format!("worst relative gap {worst:.2e} over 200 systems"),
    ));

    // derivative of a product obeys the product rule coefficient-exactly
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (dp, dq) = (rng.gen_range(0..=6), rng.gen_range(0..=6));
        let p = random_univariate(&mut rng, dp);
        let q = random_univariate(&mut rng, dq);
        let lhs = p.mul(&q).derivative();
        let rhs = p.derivative().mul(&q).add(&p.mul(&q.derivative()));
        let gap = lhs.sub(&rhs).max_abs_coeff();
        let scale = lhs.max_abs_coeff().max(1.0);
        worst = worst.max(gap / scale);
    }
    checks.push(check(
        "product-rule",
        worst < 1e-12,
        format!("worst coefficient gap {worst:.2e} over 200 products"),
    ));

    // freezing v commutes with evaluation
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let deg = rng.gen_range(1..=6);
        let p = random_bivariate(&mut rng, deg);
        let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        worst = worst.max((p.slice_at_v(v).eval(u) - p.eval(u, v)).abs());
    }
    checks.push(check(
        "slice-eval-commutes",
        worst < 1e-10,
        format!("worst gap {worst:.2e} over 200 slices"),
    ));

    // normalization lands the largest coefficient exactly on 1
    let mut ok = true;
    for _ in 0..200 {
        let deg = rng.gen_range(1..=6);
        let p = random_bivariate(&mut rng, deg);
        let (n, scale) = p.normalize_max().expect("nonzero by construction");
        ok &= n.max_abs_coeff() == 1.0 && scale > 0.0;
    }
    checks.push(check(
        "normalize-max",
        ok,
        "largest coefficient exactly 1 after scaling, 200 systems".into(),
    ));

    SuiteReport {
        suite: Suite::Poly,
        checks,
        notes: Vec::new(),
    }
}

/// Bivariate pair guaranteed to vanish at (u*, v*): random mixtures of the
/// two linear factors that are zero there.
fn planted_pair<R: Rng>(
    rng: &mut R,
    ustar: f64,
    vstar: f64,
) -> (BivariatePolynomial, BivariatePolynomial) {
    let lin_u = BivariatePolynomial::linear(-ustar, 1.0, 0.0);
    let lin_v = BivariatePolynomial::linear(-vstar, 0.0, 1.0);
    let mk = |rng: &mut R| {
        lin_u
            .mul(&random_bivariate(rng, 2))
            .add(&lin_v.mul(&random_bivariate(rng, 2)))
    };
    (mk(rng), mk(rng))
}

fn resultant_suite() -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6265);
    let mut checks = Vec::new();

    // planted common root: the conditioned determinant vanishes there
    let mut worst = 0.0f64;
    let mut built = 0usize;
    while built < 1000 {
        let (ustar, vstar) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let (a, b) = planted_pair(&mut rng, ustar, vstar);
        let (Ok((a, _)), Ok((b, _))) = (a.normalize_max(), b.normalize_max()) else {
            continue;
        };
        let Ok(rm) = bezout_matrix(&a, &b) else {
            continue;
        };
        let rm = rm.conditioned();
        worst = worst.max(det_eval(&rm.matrix, vstar).abs());
        built += 1;
    }
    checks.push(check(
        "planted-common-root",
        worst < 1e-8,
        format!("worst |det(v*)| {worst:.2e} over {built} planted systems"),
    ));

    // Bezout and Sylvester see the same hidden-variable roots
    let mut agreements = 0usize;
    let mut tried = 0usize;
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        // dense degree-(2,2) pair
        let mk = |rng: &mut ChaCha8Rng| {
            let mut p = BivariatePolynomial::zero(4);
            for i in 0..=2 {
                for j in 0..=2 {
                    p.set(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            p
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        tried += 1;
        let roots_of = |m: &crate::resultant::PolyMatrix| -> Option<Vec<f64>> {
            let det = expand_determinant(m).ok()?.normalize_max().ok()?;
            Some(isolate_roots(&det, 0.0, 1.0, tol::BISECT_TOL).ok()?.roots)
        };
        let bez = bezout_matrix(&a, &b).ok().map(|m| m.matrix).and_then(|m| roots_of(&m));
        let syl = sylvester_matrix(&a, &b).ok().and_then(|m| roots_of(&m));
        match (bez, syl) {
            (Some(rb), Some(rs)) if rb.len() == rs.len() => {
                let gap = rb
                    .iter()
                    .zip(&rs)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max);
                worst_gap = worst_gap.max(gap);
                if gap < 1e-6 {
                    agreements += 1;
                }
            }
            _ => {}
        }
    }
    checks.push(check(
        "bezout-vs-sylvester",
        agreements == tried,
        format!("{agreements}/{tried} root sets agree, worst matched gap {worst_gap:.2e}"),
    ));

    SuiteReport {
        suite: Suite::Resultant,
        checks,
        notes: Vec::new(),
    }
}

fn rootfind_suite() -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x726f);
    let mut checks = Vec::new();

    // polynomials built from known well-separated roots give them all back
    let mut ok = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let k = rng.gen_range(1..=6);
        let mut roots: Vec<f64> = Vec::new();
        while roots.len() < k {
            let r = rng.gen_range(0.02..0.98);
            if roots.iter().all(|&x| (x - r) as f64 > 1e-3 || (x - r) < -1e-3) {
                roots.push(r);
            }
        }
        roots.sort_by(f64::total_cmp);
        let mut p = UnivariatePolynomial::constant(rng.gen_range(0.5..2.0));
        for &r in &roots {
            p = p.mul(&UnivariatePolynomial::new(vec![-r, 1.0]));
        }
        let Ok(found) = isolate_roots(&p, 0.0, 1.0, tol::BISECT_TOL) else {
            continue;
        };
        if found.roots.len() == k {
            let gap = found
                .roots
                .iter()
                .zip(&roots)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            worst = worst.max(gap);
            if gap < 1e-7 {
                ok += 1;
            }
        }
    }
    checks.push(check(
        "planted-univariate-roots",
        ok == 500,
        format!("{ok}/500 planted root sets recovered, worst gap {worst:.2e}"),
    ));

    // back-substitution returns the planted u at the planted v
    let mut ok = 0usize;
    for _ in 0..300 {
        let (ustar, vstar) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
        let (a, b) = planted_pair(&mut rng, ustar, vstar);
        let (Ok((a, _)), Ok((b, _))) = (a.normalize_max(), b.normalize_max()) else {
            continue;
        };
        if let Ok(list) = back_substitute(&a, &b, vstar, tol::BISECT_TOL) {
            if list.roots.iter().any(|&u| (u - ustar).abs() < 1e-7) {
                ok += 1;
            }
        }
    }
    checks.push(check(
        "planted-back-substitution",
        ok == 300,
        format!("{ok}/300 planted u roots recovered"),
    ));

    // Newton refinement contracts a perturbed candidate onto the root
    let mut ok = 0usize;
    for _ in 0..300 {
        let (ustar, vstar) = (rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9));
        let (a, b) = planted_pair(&mut rng, ustar, vstar);
        let (Ok((a, _)), Ok((b, _))) = (a.normalize_max(), b.normalize_max()) else {
            continue;
        };
        let res = |u: f64, v: f64| a.eval(u, v).abs().max(b.eval(u, v).abs());
        let (u0, v0) = (ustar + 1e-3, vstar - 1e-3);
        let (u1, v1, _) = newton_polish_2d(&a, &b, u0, v0, 3);
        if res(u1, v1) < res(u0, v0) && (u1 - ustar).hypot(v1 - vstar) < 1e-6 {
            ok += 1;
        }
    }
    checks.push(check(
        "newton-polish-contracts",
        ok == 300,
        format!("{ok}/300 perturbed candidates pulled back onto the root"),
    ));

    SuiteReport {
        suite: Suite::Rootfind,
        checks,
        notes: Vec::new(),
    }
}

// --- oracle agreement machinery ---

/// Candidate roots the production elimination extracts from a system,
/// residual-gated against ghosts, plus whether the scan hedged. Mirrors the
/// pipeline: scan-path candidates get the same sharpening steps before the
/// gate, since the piecewise scan leaves v coarser than the gate tolerance.
fn production_roots(sys: &SpecularSystem, polish_iters: usize) -> (Vec<(f64, f64)>, bool) {
    let cfg = SolverConfig::default();
    let rm = match bezout_matrix(&sys.a, &sys.b) {
        Ok(m) => m,
        Err(_) => return (Vec::new(), false),
    };
    let scan_path = rm.n() > tol::EXPAND_MAX_N;
    let (vlist, miss_risk) = if !scan_path {
        let det = expand_determinant(&rm.matrix).expect("size-capped expansion");
        match det.normalize_max() {
            Ok(d) => match isolate_roots(&d, 0.0, 1.0, cfg.bisect_tol) {
                Ok(l) => (l, false),
                Err(_) => return (Vec::new(), false),
            },
            Err(_) => return (Vec::new(), false),
        }
    } else {
        let l = det_zero_scan(&rm, &cfg);
        let risk = l.scan_miss_risk || l.degenerate;
        (l, risk)
    };
    let sharpen = if scan_path { tol::SCAN_REFINE_STEPS } else { 0 };
    let mut out = Vec::new();
    for &v in &vlist.roots {
        if let Ok(us) = back_substitute(&sys.a, &sys.b, v, cfg.bisect_tol) {
            for &u in &us.roots {
                let (mut u, mut v) = (u, v);
                if sharpen + polish_iters > 0 {
                    let (u1, v1, _) = sys.polish(u, v, sharpen + polish_iters);
                    (u, v) = (u1, v1);
                }
                if sys.residual(u, v) <= tol::PREFILTER_RESIDUAL {
                    out.push((u, v));
                }
            }
        }
    }
    (out, miss_risk)
}

/// Restricts roots to the window both search strategies cover: the
/// production solver sweeps a rectangle (v in the scan interval, u in the
/// margined interval) while the lattice covers the margined simplex.
/// Agreement is only meaningful on the intersection.
fn shared_window(pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let margin = tol::U_INTERVAL_HI - 1.0;
    pts.into_iter()
        .filter(|&(u, v)| {
            (0.0..=1.0).contains(&v)
                && (tol::U_INTERVAL_LO..=tol::U_INTERVAL_HI).contains(&u)
                && BarycentricCoord::new(u, v).inside(margin)
        })
        .collect()
}

/// Two points describe the same root at working precision when the
/// straight segment between them never leaves the residual sublevel set of
/// height `wall`: along a near-tangent valley the zero curves of a and b
/// run together and the residual floor stays pinned, so distinct descents
/// land anywhere on the valley floor. Distinct transversal roots always
/// raise a residual ridge between themselves.
fn same_numerical_root(sys: &SpecularSystem, p: (f64, f64), q: (f64, f64), wall: f64) -> bool {
    const STEPS: usize = 32;
    let near = (p.0 - q.0).hypot(p.1 - q.1) < 2e-3;
    near && (0..=STEPS).all(|k| {
        let t = k as f64 / STEPS as f64;
        sys.residual(p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)) < wall
    })
}

/// Agreement after applying the near-tangent allowance: where finite
/// precision cannot decide how many roots a valley holds, the comparison
/// must not pretend it can.
struct AllowanceReport {
    matched: usize,
    /// Denominator classes after exclusions.
    total: usize,
    /// Genuine misses (no valley connection to anything found).
    missed: Vec<(f64, f64)>,
    /// Found points with no partner.
    spurious: usize,
    /// Log lines for every merge or exclusion.
    notes: Vec<String>,
}

/// Matches solver output against the lattice reference, treating
/// valley-connected root groups as single roots. Reference points whose
/// connecting segment stays under the oracle's own residual gate merge into
/// one class; a missed class valley-connected to a solver point at the
/// solver point's own residual level is excluded as undecidable.
fn compare_with_allowance(
    label: &str,
    sys: &SpecularSystem,
    found: &[(f64, f64)],
    reference: &[(f64, f64)],
) -> AllowanceReport {
    let mut notes = Vec::new();

    // merge reference-internal splits of one valley
    let mut classes: Vec<Vec<(f64, f64)>> = Vec::new();
    'outer: for &p in reference {
        for cl in classes.iter_mut() {
            if cl
                .iter()
                .any(|&q| same_numerical_root(sys, p, q, tol::ORACLE_RESIDUAL_GATE))
            {
                cl.push(p);
                continue 'outer;
            }
        }
        classes.push(vec![p]);
    }
    // represent each class by the member nearest to any found point, so a
    // matched valley matches regardless of where the lattice landed
    let reps: Vec<(f64, f64)> = classes
        .iter()
        .map(|cl| {
            let best = cl
                .iter()
                .min_by(|&&a, &&b| {
                    let d = |p: (f64, f64)| {
                        found
                            .iter()
                            .map(|&(fu, fv)| (fu - p.0).hypot(fv - p.1))
                            .fold(f64::INFINITY, f64::min)
                    };
                    d(a).total_cmp(&d(b))
                })
                .copied()
                .unwrap();
            if cl.len() > 1 {
                notes.push(format!(
                    "{label}: {} lattice descents in one valley near ({:.6}, {:.6}) treated as one root",
                    cl.len(),
                    best.0,
                    best.1
                ));
            }
            best
        })
        .collect();

    let r = compare_solution_sets(found, &reps, tol::MATCH_TOL);
    let mut total = r.oracle_total;
    let mut missed = Vec::new();
    for &(u, v) in &r.missed {
        let connected = found.iter().find(|&&(fu, fv)| {
            let wall = (2.0 * sys.residual(fu, fv)).max(tol::ORACLE_RESIDUAL_GATE);
            same_numerical_root(sys, (u, v), (fu, fv), wall)
        });
        if let Some(&(fu, fv)) = connected {
            total -= 1;
            notes.push(format!(
                "{label}: reference ({u:.6}, {v:.6}) and solver ({fu:.6}, {fv:.6}) share one valley; root count undecidable, excluded"
            ));
        } else {
            missed.push((u, v));
        }
    }
    AllowanceReport {
        matched: r.matched,
        total,
        missed,
        spurious: r.spurious.len(),
        notes,
    }
}

// --- oracle agreement suites ---

/// Fixed seed bases for the three corpora; changing them invalidates the
/// frozen expectations.
const R_SEED_BASE: u64 = 2000;
const T_SEED_BASE: u64 = 3000;
const RR_SEED_BASE: u64 = 4000;

fn collect_cases<T: Send>(
    base: u64,
    want: usize,
    make: impl Fn(u64) -> Option<T> + Sync,
) -> Vec<T> {
    // deterministic: try seeds in order, keep the first `want` that build
    (0..3 * want as u64)
        .into_par_iter()
        .map(|s| make(base + s))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .take(want)
        .collect()
}

fn oracle_r_suite() -> SuiteReport {
    let cases: Vec<OneBounceCase> = collect_cases(R_SEED_BASE, 1000, random_mirror_case);
    let oc = OracleConfig::default();
    let outcomes: Vec<(usize, usize, usize, Vec<String>)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let (found, _) = production_roots(&c.sys, 0);
            let reference = shared_window(brute_force_roots(&c.sys, &oc));
            let found = shared_window(found);
            let r = compare_solution_sets(&found, &reference, tol::MATCH_TOL);
            let mut notes = Vec::new();
            if r.recall < 1.0 || r.precision < 1.0 {
                notes.push(format!(
                    "system {i}: recall {:.3} precision {:.3} missed {:?} spurious {:?}",
                    r.recall, r.precision, r.missed, r.spurious
                ));
            }
            (r.matched, r.oracle_total, r.found_total, notes)
        })
        .collect();
    let matched: usize = outcomes.iter().map(|o| o.0).sum();
    let ref_total: usize = outcomes.iter().map(|o| o.1).sum();
    let found_total: usize = outcomes.iter().map(|o| o.2).sum();
    let notes: Vec<String> = outcomes.into_iter().flat_map(|o| o.3).collect();
    let exact = matched == ref_total && matched == found_total;
    SuiteReport {
        suite: Suite::OracleR,
        checks: vec![check(
            "exact-agreement",
            exact,
            format!(
                "{} systems, matched {matched}, reference {ref_total}, found {found_total}",
                cases.len()
            ),
        )],
        notes,
    }
}

fn oracle_t_suite() -> SuiteReport {
    let cases: Vec<OneBounceCase> = collect_cases(T_SEED_BASE, 1000, random_interface_case);
    let oc = OracleConfig::default();
    let outcomes: Vec<(usize, usize, Vec<String>)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            // polish on: the production default for refraction chains
            let (found, _) = production_roots(&c.sys, 2);
            let reference = shared_window(brute_force_roots(&c.sys, &oc));
            let found = shared_window(found);
            let label = format!("system {i}");
            let r = compare_with_allowance(&label, &c.sys, &found, &reference);
            let mut notes = r.notes;
            if r.spurious > 0 {
                notes.push(format!("system {i}: {} unmatched solver roots", r.spurious));
            }
            let ratio = c.chain.events[0].eta_ratio();
            for &(u, v) in &r.missed {
                // diagnose how close the missed root sits to the transmitted
                // branch's disappearance
                let bc = BarycentricCoord::new(u, v);
                let d = (c.tri.interpolate_position(bc) - c.seps.x0).normalize();
                let n = c.tri.interpolate_normal(bc).normalize();
                let cos = d.dot(&n);
                let radicand = (1.0 - ratio * ratio) + ratio * ratio * cos * cos;
                notes.push(format!(
                    "system {i}: missed ({u:.6}, {v:.6}), radicand fraction {radicand:.3e}"
                ));
            }
            (r.matched, r.total, notes)
        })
        .collect();
    let matched: usize = outcomes.iter().map(|o| o.0).sum();
    let total: usize = outcomes.iter().map(|o| o.1).sum();
    let notes: Vec<String> = outcomes.into_iter().flat_map(|o| o.2).collect();
    let recall = matched as f64 / total.max(1) as f64;
    SuiteReport {
        suite: Suite::OracleT,
        checks: vec![check(
            "recall",
            recall >= 0.99,
            format!("recall {recall:.4} ({matched}/{total}) over {} systems", cases.len()),
        )],
        notes,
    }
}

fn oracle_rr_suite() -> SuiteReport {
    let cases: Vec<TwoBounceCase> = collect_cases(RR_SEED_BASE, 200, random_two_bounce_case);
    let oc = OracleConfig::default();
    let outcomes: Vec<(usize, usize, usize, bool, Vec<String>)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let (found, miss_risk) = production_roots(&c.sys, 0);
            let reference = shared_window(brute_force_roots(&c.sys, &oc));
            let found = shared_window(found);
            let label = format!("system {i}");
            let r = compare_with_allowance(&label, &c.sys, &found, &reference);
            let mut notes = r.notes;
            if r.spurious > 0 {
                notes.push(format!("system {i}: {} unmatched solver roots", r.spurious));
            }
            for &(u, v) in &r.missed {
                notes.push(format!(
                    "system {i}: missed ({u:.6}, {v:.6}), scan flag {miss_risk}"
                ));
            }
            (r.matched, r.total, r.missed.len(), miss_risk, notes)
        })
        .collect();
    let matched: usize = outcomes.iter().map(|o| o.0).sum();
    let total: usize = outcomes.iter().map(|o| o.1).sum();
    let recall = matched as f64 / total.max(1) as f64;
    let unflagged: usize = outcomes
        .iter()
        .filter(|o| o.2 > 0 && !o.3)
        .map(|o| o.2)
        .sum();
    let notes: Vec<String> = outcomes.into_iter().flat_map(|o| o.4).collect();
    SuiteReport {
        suite: Suite::OracleRr,
        checks: vec![
            check(
                "recall",
                recall >= 0.95,
                format!("recall {recall:.4} ({matched}/{total}) over {} systems", cases.len()),
            ),
            check(
                "misses-flagged",
                unflagged == 0,
                format!("{unflagged} misses without a scan-miss flag"),
            ),
        ],
        notes,
    }
}

/// Flat-fixture sanity shared by the CLI: the analytic mirror and interface
/// fixtures must reproduce their closed forms through the full pipeline.
pub fn analytic_fixture_report() -> SuiteReport {
    let mut checks = Vec::new();

    let fx = fixtures::mirror_fixture();
    let (chains, _) = crate::pipeline::solve_scene(
        &fx.scene,
        &fx.seps,
        &[crate::polynomialize::ChainClass::R],
        &SolverConfig::default(),
        false,
    );
    let ok = chains.len() == 1
        && (chains[0].vertices[1] - fx.expected_vertex).norm() < 1e-6;
    checks.push(check(
        "flat-mirror-image-source",
        ok,
        format!("{} chains", chains.len()),
    ));

    let fx = fixtures::interface_fixture(1.5);
    let (chains, _) = crate::pipeline::solve_scene(
        &fx.scene,
        &fx.seps,
        &[crate::polynomialize::ChainClass::T],
        &SolverConfig::default(),
        false,
    );
    let ok = chains.len() == 1 && (chains[0].vertices[1].x - fx.expected_x).abs() < 1e-4;
    checks.push(check(
        "flat-interface-fermat",
        ok,
        format!("{} chains", chains.len()),
    ));

    SuiteReport {
        suite: Suite::Poly,
        checks,
        notes: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poly_suite_passes() {
        let r = poly_suite();
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn resultant_suite_passes() {
        let r = resultant_suite();
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn rootfind_suite_passes() {
        let r = rootfind_suite();
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn one_bounce_mirror_agreement_is_exact() {
        let r = oracle_r_suite();
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn one_bounce_interface_recall_gate() {
        let r = oracle_t_suite();
        for n in &r.notes {
            println!("{n}");
        }
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn two_bounce_recall_and_flag_gate() {
        let r = oracle_rr_suite();
        for n in &r.notes {
            println!("{n}");
        }
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::all() {
            assert_eq!(Suite::from_name(s.name()), Some(s));
        }
        assert_eq!(Suite::from_name("nope"), None);
    }

    #[test]
    fn render_text_shape() {
        let rep = SuiteReport {
            suite: Suite::Poly,
            checks: vec![check("alpha", true, "fine".into())],
            notes: vec!["extra".into()],
        };
        let text = rep.render();
        assert!(text.contains("suite poly: PASS"));
        assert!(text.contains("check alpha: PASS (fine)"));
        assert!(text.contains("note: extra"));
    }
}
