//! Brute-force reference solver.
//!
//! Dense lattice seeding plus damped Newton descent — deliberately the
//! opposite strategy of the production pipeline, and deliberately sharing no
//! root-finding code with it, so agreement between the two is evidence
//! rather than tautology. Descending from *every* grid minimum sidesteps the
//! usual seed-sensitivity objection to Newton searching: at verification
//! scale there is nothing left for seeding to miss, as long as every root
//! basin spans at least a couple of grid cells (checked empirically for the
//! fixture systems; grid_n = 256 leaves a wide margin).

use crate::pipeline::{validate_path, SpecularChain};
use crate::poly::BivariatePolynomial;
use crate::polynomialize::{build_system, ChainType, SpecularSystem};
use crate::scene::{BarycentricCoord, Scene, Separators, SpecularTriangle};
use crate::tol;
use rayon::prelude::*;

/// Brute-force search knobs; the defaults match the pinned verification
/// configuration.
#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    /// Lattice samples per axis.
    pub grid_n: usize,
    /// Damped Newton steps from each surviving lattice minimum.
    pub refine_iters: usize,
    /// Roots closer than this merge into one.
    pub cluster_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            grid_n: tol::ORACLE_GRID_N,
            refine_iters: tol::ORACLE_REFINE_ITERS,
            cluster_tol: tol::ORACLE_CLUSTER_TOL,
        }
    }
}

/// Search domain: the barycentric simplex widened by the same margin the
/// production solver uses for its hidden-variable interval.
fn search_margin() -> f64 {
    tol::U_INTERVAL_HI - 1.0
}

/// Common real roots of the system (a, b) over the margined simplex.
///
/// Evaluates max(|a|, |b|) on a grid_n x grid_n lattice, descends from every
/// local minimum of the lattice with an independent damped Newton, clusters
/// the landing points, and keeps those with residual below the gate.
pub fn brute_force_roots(sys: &SpecularSystem, cfg: &OracleConfig) -> Vec<(f64, f64)> {
    brute_force_roots_ab(&sys.a, &sys.b, cfg)
}

/// [`brute_force_roots`] on a bare polynomial pair (normalized internally;
/// a pair with an identically-zero member has no isolated roots to report).
pub fn brute_force_roots_ab(
    a: &BivariatePolynomial,
    b: &BivariatePolynomial,
    cfg: &OracleConfig,
) -> Vec<(f64, f64)> {
    assert!(cfg.grid_n >= 16, "lattice too coarse to trust");
    let (a, b) = match (a.normalize_max(), b.normalize_max()) {
        (Ok((a, _)), Ok((b, _))) => (a, b),
        _ => return Vec::new(),
    };
    let (au, av) = (a.derivative_u(), a.derivative_v());
    let (bu, bv) = (b.derivative_u(), b.derivative_v());

    let n = cfg.grid_n;
    let lo = tol::U_INTERVAL_LO;
    let step = (tol::U_INTERVAL_HI - lo) / (n - 1) as f64;
    let margin = search_margin();
    let at = |i: usize| lo + step * i as f64;

    // residual surface; outside the margined simplex is treated as a wall
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let v = at(j);
            (0..n)
                .map(|i| {
                    let u = at(i);
                    if BarycentricCoord::new(u, v).inside(margin) {
                        a.eval(u, v).abs().max(b.eval(u, v).abs())
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();

    // every lattice point no worse than its 8 neighbors seeds a descent
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let c = rows[j][i];
            if !c.is_finite() {
                continue;
            }
            let mut is_min = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                        continue;
                    }
                    if rows[nj as usize][ni as usize] < c {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                seeds.push((at(i), at(j)));
            }
        }
    }

    let mut landed: Vec<(f64, f64, f64)> = seeds
        .par_iter()
        .map(|&(u, v)| descend(&a, &b, &au, &av, &bu, &bv, u, v, cfg.refine_iters))
        .collect();
    landed.retain(|&(u, v, res)| {
        BarycentricCoord::new(u, v).inside(margin) && res < tol::ORACLE_RESIDUAL_GATE
    });

    // cluster: best residual first, keep points no kept root already covers
    landed.sort_by(|x, y| {
        x.2.total_cmp(&y.2)
            .then(x.0.total_cmp(&y.0))
            .then(x.1.total_cmp(&y.1))
    });
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for (u, v, _) in landed {
        if !kept
            .iter()
            .any(|&(ku, kv)| (ku - u).hypot(kv - v) < cfg.cluster_tol)
        {
            kept.push((u, v));
        }
    }
    kept.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    kept
}

/// Damped Newton on F = (a, b): halve the step while it fails to reduce
/// max(|a|, |b|); stop on a singular Jacobian or a dead line search. This is
/// an independent implementation from the production polish on purpose.
#[allow(clippy::too_many_arguments)]
fn descend(
    a: &BivariatePolynomial,
    b: &BivariatePolynomial,
    au: &BivariatePolynomial,
    av: &BivariatePolynomial,
    bu: &BivariatePolynomial,
    bv: &BivariatePolynomial,
    mut u: f64,
    mut v: f64,
    iters: usize,
) -> (f64, f64, f64) {
    let res = |u: f64, v: f64| a.eval(u, v).abs().max(b.eval(u, v).abs());
    for _ in 0..iters {
        let (fa, fb) = (a.eval(u, v), b.eval(u, v));
        let cur = fa.abs().max(fb.abs());
        if cur == 0.0 {
            break;
        }
        let j = [au.eval(u, v), av.eval(u, v), bu.eval(u, v), bv.eval(u, v)];
        let det = j[0] * j[3] - j[1] * j[2];
        let jscale = j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if det.abs() <= 1e-16 * jscale * jscale + f64::MIN_POSITIVE {
            break;
        }
        let du = (fa * j[3] - fb * j[1]) / det;
        let dv = (j[0] * fb - j[2] * fa) / det;
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..12 {
            if res(u - t * du, v - t * dv) < cur {
                u -= t * du;
                v -= t * dv;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (u, v, res(u, v))
}

/// Brute-force admissible chains: the same system construction and the same
/// path validation as the production pipeline, with only the root-finding
/// swapped for the lattice search — isolating root-finding as the component
/// under test.
pub fn brute_force_chains(
    seps: &Separators,
    tuple: &[usize],
    chain: &ChainType,
    scene: &Scene,
    cfg: &OracleConfig,
) -> Vec<SpecularChain> {
    let tris: Vec<&SpecularTriangle> = tuple.iter().map(|&i| &scene.triangles[i]).collect();
    let sys = match build_system(seps, &tris, chain) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let mut out: Vec<SpecularChain> = Vec::new();
    for (u, v) in brute_force_roots(&sys, cfg) {
        let cand = validate_path(seps, tuple, chain, BarycentricCoord::new(u, v), scene, true);
        if !cand.admissible() {
            continue;
        }
        let dup = out.iter().any(|c| {
            (c.bcs[0].u - cand.bcs[0].u).hypot(c.bcs[0].v - cand.bcs[0].v) < cfg.cluster_tol
        });
        if !dup {
            out.push(cand);
        }
    }
    out
}

/// Outcome of matching a found solution set against a reference set.
#[derive(Clone, Debug)]
pub struct MatchReport {
    pub matched: usize,
    pub oracle_total: usize,
    pub found_total: usize,
    /// matched / |reference| (1 when the reference set is empty).
    pub recall: f64,
    /// matched / |found| (1 when the found set is empty).
    pub precision: f64,
    /// Largest distance among matched pairs.
    pub worst_distance: f64,
    /// Reference roots with no partner.
    pub missed: Vec<(f64, f64)>,
    /// Found roots with no partner.
    pub spurious: Vec<(f64, f64)>,
}

/// Matches two root sets: dedups each at `tol_pos`, then pairs greedily by
/// globally smallest distance under `tol_pos` (deterministic tie order).
pub fn compare_solution_sets(
    found: &[(f64, f64)],
    oracle_set: &[(f64, f64)],
    tol_pos: f64,
) -> MatchReport {
    assert!(tol_pos > 0.0);
    let f = dedup_points(found, tol_pos);
    let o = dedup_points(oracle_set, tol_pos);

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (fi, &(fu, fv)) in f.iter().enumerate() {
        for (oi, &(ou, ov)) in o.iter().enumerate() {
            let d = (fu - ou).hypot(fv - ov);
            if d <= tol_pos {
                pairs.push((d, fi, oi));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut f_used = vec![false; f.len()];
    let mut o_used = vec![false; o.len()];
    let mut matched = 0usize;
    let mut worst = 0.0f64;
    for (d, fi, oi) in pairs {
        if !f_used[fi] && !o_used[oi] {
            f_used[fi] = true;
            o_used[oi] = true;
            matched += 1;
            worst = worst.max(d);
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    MatchReport {
        matched,
        oracle_total: o.len(),
        found_total: f.len(),
        recall: ratio(matched, o.len()),
        precision: ratio(matched, f.len()),
        worst_distance: worst,
        missed: o
            .iter()
            .zip(&o_used)
            .filter(|(_, &used)| !used)
            .map(|(&p, _)| p)
            .collect(),
        spurious: f
            .iter()
            .zip(&f_used)
            .filter(|(_, &used)| !used)
            .map(|(&p, _)| p)
            .collect(),
    }
}

/// Lexicographic sort, then greedy clustering against the kept
/// representatives.
fn dedup_points(pts: &[(f64, f64)], tol_pos: f64) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = pts.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for (u, v) in sorted {
        if !kept
            .iter()
            .any(|&(ku, kv)| (ku - u).hypot(kv - v) < tol_pos)
        {
            kept.push((u, v));
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomialize::{resolve_chain, ChainClass};
    use crate::resultant::bezout_matrix;
    use crate::rootfind::{back_substitute, det_zero_scan, isolate_roots, SolverConfig};
    use crate::scene::{Camera, NormalMode, Vec3};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn bp(rows: &[&[f64]]) -> BivariatePolynomial {
        // rows[i][j] = coefficient of u^i v^j
        let deg = rows.len() - 1;
        let mut p = BivariatePolynomial::zero(deg.max(rows.iter().map(|r| r.len() - 1).max().unwrap()));
        for (i, row) in rows.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    p.set(i, j, c);
                }
            }
        }
        p
    }

    #[test]
    fn planted_single_root_recovered() {
        // skew linear pair: a = u - 0.1 v + c1, b = 0.05 u + v + c2
        let c1 = -0.37 + 0.1 * 0.52;
        let c2 = -0.52 - 0.05 * 0.37;
        let a = bp(&[&[c1, -0.1], &[1.0]]);
        let b = bp(&[&[c2, 1.0], &[0.05]]);
        // the exact 2x2 intersection
        let det = 1.0 + 0.1 * 0.05;
        let u_ref = (-c1 - 0.1 * c2) / det;
        let v_ref = (-c2 + 0.05 * c1) / det;

        let roots = brute_force_roots_ab(&a, &b, &OracleConfig::default());
        assert_eq!(roots.len(), 1, "{roots:?}");
        assert!((roots[0].0 - u_ref).abs() < 1e-8);
        assert!((roots[0].1 - v_ref).abs() < 1e-8);
    }

    #[test]
    fn rootless_system_is_empty() {
        let a = bp(&[&[3.0, 1.0], &[1.0]]); // u + v + 3
        let b = bp(&[&[5.0, -1.0], &[1.0]]); // u - v + 5
        assert!(brute_force_roots_ab(&a, &b, &OracleConfig::default()).is_empty());
    }

    #[test]
    fn symmetric_pair_found_symmetrically() {
        // circle (u-.4)^2 + (v-.4)^2 = 0.02 meets the diagonal u = v at
        // 0.4 +- 0.1 on both axes
        let mut a = BivariatePolynomial::zero(2);
        a.set(0, 0, 0.4 * 0.4 + 0.4 * 0.4 - 0.02);
        a.set(1, 0, -0.8);
        a.set(0, 1, -0.8);
        a.set(2, 0, 1.0);
        a.set(0, 2, 1.0);
        let b = bp(&[&[0.0, -1.0], &[1.0]]); // u - v
        let roots = brute_force_roots_ab(&a, &b, &OracleConfig::default());
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0].0 - 0.3).abs() < 1e-8 && (roots[0].1 - 0.3).abs() < 1e-8);
        assert!((roots[1].0 - 0.5).abs() < 1e-8 && (roots[1].1 - 0.5).abs() < 1e-8);
        // symmetric about the circle center
        assert!((roots[0].0 + roots[1].0 - 0.8).abs() < 1e-9);
    }

    fn flat_tri(eta_in: f64) -> SpecularTriangle {
        SpecularTriangle {
            positions: [
                Vec3::new(-2.0, -2.0, 0.0),
                Vec3::new(3.0, -2.0, 0.0),
                Vec3::new(-2.0, 3.0, 0.0),
            ],
            shading_normals: [Vec3::new(0.0, 0.0, 1.0); 3],
            normal_mode: NormalMode::Face,
            eta_out: 1.0,
            eta_in,
        }
    }

    fn bare_scene(tris: Vec<SpecularTriangle>) -> Scene {
        Scene::new(tris, vec![], vec![], Camera::basic(Vec3::new(0.0, 0.0, 5.0))).unwrap()
    }

    #[test]
    fn flat_mirror_chain_is_the_image_source_point() {
        let scene = bare_scene(vec![flat_tri(1.0)]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let chain = resolve_chain(ChainClass::R, &seps, &[&scene.triangles[0]]).unwrap();
        let chains = brute_force_chains(&seps, &[0], &chain, &scene, &OracleConfig::default());
        assert_eq!(chains.len(), 1);
        assert!((chains[0].vertices[1] - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-7);
    }

    #[test]
    fn flat_interface_chain_matches_fermat() {
        let scene = bare_scene(vec![flat_tri(1.5)]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, -1.0));
        let chain = resolve_chain(ChainClass::T, &seps, &[&scene.triangles[0]]).unwrap();
        let chains = brute_force_chains(&seps, &[0], &chain, &scene, &OracleConfig::default());
        assert_eq!(chains.len(), 1);
        let f_prime = |x: f64| -> f64 {
            x / (x * x + 1.0).sqrt() - 1.5 * (1.0 - x) / ((1.0 - x) * (1.0 - x) + 1.0).sqrt()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f_prime(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((chains[0].vertices[1].x - 0.5 * (lo + hi)).abs() < 1e-4);
    }

    #[test]
    fn compare_examples() {
        let set = [(0.2, 0.3), (0.7, 0.1)];
        let r = compare_solution_sets(&set, &set, tol::MATCH_TOL);
        assert_eq!((r.recall, r.precision), (1.0, 1.0));
        assert_eq!(r.matched, 2);

        let r = compare_solution_sets(&set[..1], &set, tol::MATCH_TOL);
        assert_eq!((r.recall, r.precision), (0.5, 1.0));
        assert_eq!(r.missed, vec![(0.7, 0.1)]);

        // jittered duplicates dedup before matching
        let jittered = [(0.2, 0.3), (0.2 + 1e-7, 0.3 - 1e-7), (0.7, 0.1)];
        let r = compare_solution_sets(&jittered, &set, tol::MATCH_TOL);
        assert_eq!((r.recall, r.precision), (1.0, 1.0));
        assert_eq!(r.found_total, 2);
    }

    // --- randomized solver-vs-oracle agreement ---

    fn rv(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-r..r),
            rng.gen_range(-r..r),
            rng.gen_range(-r..r),
        )
    }

    fn random_triangle(rng: &mut ChaCha8Rng, center: Vec3, span: f64) -> SpecularTriangle {
        loop {
            let p = [
                center + rv(rng, span),
                center + rv(rng, span),
                center + rv(rng, span),
            ];
            let g = (p[1] - p[0]).cross(&(p[2] - p[0]));
            if g.norm() < 0.3 * span * span {
                continue;
            }
            let gn = g.normalize();
            let sn = std::array::from_fn(|_| {
                let jitter = rv(rng, 1.0);
                (gn + 0.25 * jitter).normalize()
            });
            return SpecularTriangle {
                positions: p,
                shading_normals: sn,
                normal_mode: NormalMode::Interpolated,
                eta_out: 1.0,
                eta_in: 1.5,
            };
        }
    }

    /// Candidate roots the production elimination extracts from a system,
    /// residual-gated against ghosts, plus whether the scan hedged. Mirrors
    /// the pipeline: scan-path candidates get the same sharpening steps
    /// before the gate, since the piecewise scan leaves v coarser than the
    /// gate tolerance.
    fn solver_roots(sys: &SpecularSystem, polish_iters: usize) -> (Vec<(f64, f64)>, bool) {
        let cfg = SolverConfig::default();
        let rm = match bezout_matrix(&sys.a, &sys.b) {
            Ok(m) => m,
            Err(_) => return (Vec::new(), false),
        };
        let scan_path = rm.n() > tol::EXPAND_MAX_N;
        let (vlist, miss_risk) = if !scan_path {
            let det = crate::resultant::expand_determinant(&rm.matrix).unwrap();
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
    /// production solver sweeps a rectangle (v in the scan interval, u in
    /// the margined interval) while the lattice covers the margined simplex.
    /// Agreement is only meaningful on the intersection.
    fn in_window(pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        let margin = search_margin();
        pts.into_iter()
            .filter(|&(u, v)| {
                (0.0..=1.0).contains(&v)
                    && (tol::U_INTERVAL_LO..=tol::U_INTERVAL_HI).contains(&u)
                    && BarycentricCoord::new(u, v).inside(margin)
            })
            .collect()
    }

    /// Two points describe the same root at working precision when the
    /// straight segment between them never leaves the residual sublevel set
    /// of height `wall`: along a near-tangent valley the zero curves of a
    /// and b run together and the residual floor stays pinned, so distinct
    /// descents land anywhere on the valley floor. Distinct transversal
    /// roots always raise a residual ridge between themselves.
    fn same_numerical_root(
        sys: &SpecularSystem,
        p: (f64, f64),
        q: (f64, f64),
        wall: f64,
    ) -> bool {
        const STEPS: usize = 32;
        let near = (p.0 - q.0).hypot(p.1 - q.1) < 2e-3;
        near && (0..=STEPS).all(|k| {
            let t = k as f64 / STEPS as f64;
            sys.residual(p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)) < wall
        })
    }

    /// Agreement report after applying the near-tangent allowance: where
    /// finite precision cannot decide how many roots a valley holds, the
    /// comparison must not pretend it can.
    struct AllowanceReport {
        matched: usize,
        /// Denominator classes after exclusions.
        total: usize,
        /// Genuine misses (no valley connection to anything found).
        missed: Vec<(f64, f64)>,
        /// Log lines for every merge or exclusion.
        notes: Vec<String>,
    }

    /// Matches solver output against the lattice reference, treating
    /// valley-connected root groups as single roots. Oracle points whose
    /// connecting segment stays under the oracle's own residual gate merge
    /// into one class; a missed class valley-connected to a solver point at
    /// the solver point's own residual level is excluded as undecidable.
    fn compare_with_allowance(
        label: &str,
        sys: &SpecularSystem,
        found: &[(f64, f64)],
        reference: &[(f64, f64)],
    ) -> AllowanceReport {
        let mut notes = Vec::new();

        // merge oracle-internal splits of one valley
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
        // represent each class by the member nearest to any found point, so
        // a matched valley matches regardless of where the lattice landed
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
            notes,
        }
    }

    #[test]
    fn solver_matches_oracle_on_one_bounce_mirrors() {
        let systems: Vec<SpecularSystem> = (0..1500u64)
            .filter_map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
                let tri = random_triangle(&mut rng, Vec3::zeros(), 1.0);
                let seps = Separators::new(
                    Vec3::new(0.0, 0.0, 2.0) + rv(&mut rng, 0.5),
                    Vec3::new(0.5, 0.0, 2.0) + rv(&mut rng, 0.5),
                );
                let chain = resolve_chain(ChainClass::R, &seps, &[&tri]).ok()?;
                build_system(&seps, &[&tri], &chain).ok()
            })
            .take(1000)
            .collect();
        assert_eq!(systems.len(), 1000);

        let oc = OracleConfig::default();
        let bad: Vec<String> = systems
            .par_iter()
            .enumerate()
            .filter_map(|(i, sys)| {
                let (found, _) = solver_roots(sys, 0);
                let reference = in_window(brute_force_roots(sys, &oc));
                let found = in_window(found);
                let r = compare_solution_sets(&found, &reference, tol::MATCH_TOL);
                if r.recall < 1.0 || r.precision < 1.0 {
                    Some(format!(
                        "system {i}: recall {:.3} precision {:.3} missed {:?} spurious {:?}",
                        r.recall, r.precision, r.missed, r.spurious
                    ))
                } else {
                    None
                }
            })
            .collect();
        assert!(bad.is_empty(), "{} disagreements:\n{}", bad.len(), bad.join("\n"));
    }

    #[test]
    fn solver_matches_oracle_on_one_bounce_interfaces() {
        struct Case {
            sys: SpecularSystem,
            tri: SpecularTriangle,
            seps: Separators,
            ratio: f64,
        }
        let cases: Vec<Case> = (0..1500u64)
            .filter_map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
                let tri = random_triangle(&mut rng, Vec3::zeros(), 1.0);
                let above = Vec3::new(0.0, 0.0, 2.0) + rv(&mut rng, 0.5);
                let below = Vec3::new(0.3, 0.2, -2.0) + rv(&mut rng, 0.5);
                let seps = Separators::new(above, below);
                let chain = resolve_chain(ChainClass::T, &seps, &[&tri]).ok()?;
                let ratio = chain.events[0].eta_ratio();
                let sys = build_system(&seps, &[&tri], &chain).ok()?;
                Some(Case { sys, tri, seps, ratio })
            })
            .take(1000)
            .collect();
        assert_eq!(cases.len(), 1000);

        let oc = OracleConfig::default();
        let results: Vec<(usize, usize, Vec<String>)> = cases
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                // polish on: the production default for refraction chains
                let (found, _) = solver_roots(&c.sys, 2);
                let reference = in_window(brute_force_roots(&c.sys, &oc));
                let found = in_window(found);
                let label = format!("system {i}");
                let r = compare_with_allowance(&label, &c.sys, &found, &reference);
                let mut lines = r.notes;
                for &(u, v) in &r.missed {
                    // diagnose how close the missed root sits to the
                    // transmitted branch's disappearance
                    let bc = BarycentricCoord::new(u, v);
                    let d = (c.tri.interpolate_position(bc) - c.seps.x0).normalize();
                    let n = c.tri.interpolate_normal(bc).normalize();
                    let cos = d.dot(&n);
                    let s = (1.0 - c.ratio * c.ratio) + c.ratio * c.ratio * cos * cos;
                    lines.push(format!(
                        "system {i}: missed ({u:.6}, {v:.6}), radicand fraction {s:.3e}"
                    ));
                }
                (r.matched, r.total, lines)
            })
            .collect();
        let matched: usize = results.iter().map(|r| r.0).sum();
        let total: usize = results.iter().map(|r| r.1).sum();
        for line in results.iter().flat_map(|r| &r.2) {
            println!("{line}");
        }
        let recall = matched as f64 / total.max(1) as f64;
        assert!(
            recall >= 0.99,
            "interface recall {recall:.4} ({matched}/{total})"
        );
    }

    #[test]
    fn solver_matches_oracle_on_two_bounce_mirrors() {
        let systems: Vec<SpecularSystem> = (0..400u64)
            .filter_map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
                let tri1 = random_triangle(&mut rng, Vec3::zeros(), 1.0);
                let tri2 = random_triangle(&mut rng, Vec3::new(0.0, 0.0, 2.5), 1.0);
                let seps = Separators::new(
                    Vec3::new(0.0, 0.0, -2.0) + rv(&mut rng, 0.5),
                    Vec3::new(0.0, 0.0, 4.5) + rv(&mut rng, 0.5),
                );
                let chain = resolve_chain(ChainClass::RR, &seps, &[&tri1, &tri2]).ok()?;
                build_system(&seps, &[&tri1, &tri2], &chain).ok()
            })
            .take(200)
            .collect();
        assert_eq!(systems.len(), 200);

        let oc = OracleConfig::default();
        let results: Vec<(usize, usize, usize, bool, Vec<String>)> = systems
            .par_iter()
            .enumerate()
            .map(|(i, sys)| {
                let (found, miss_risk) = solver_roots(sys, 0);
                let reference = in_window(brute_force_roots(sys, &oc));
                let found = in_window(found);
                let label = format!("system {i}");
                let r = compare_with_allowance(&label, sys, &found, &reference);
                (r.matched, r.total, r.missed.len(), miss_risk, r.notes)
            })
            .collect();
        for line in results.iter().flat_map(|r| &r.4) {
            println!("{line}");
        }
        let matched: usize = results.iter().map(|r| r.0).sum();
        let total: usize = results.iter().map(|r| r.1).sum();
        let recall = matched as f64 / total.max(1) as f64;
        assert!(
            recall >= 0.95,
            "two-bounce recall {recall:.4} ({matched}/{total})"
        );
        for (i, r) in results.iter().enumerate() {
            let (missed, flagged) = (r.2, r.3);
            assert!(
                missed == 0 || flagged,
                "system {i}: {missed} roots missed without a scan-miss flag"
            );
        }
    }

    /// A broad, near-flat mirror with a randomly warped normal field: the
    /// shading normals tilt independently, so the reflection condition can
    /// hold at zero, one, or several interior points.
    fn warped_mirror(rng: &mut ChaCha8Rng) -> SpecularTriangle {
        let positions = [
            Vec3::new(-2.0, -2.0, 0.2 * rng.gen_range(-1.0..1.0)),
            Vec3::new(2.6, -1.8, 0.2 * rng.gen_range(-1.0..1.0)),
            Vec3::new(-1.7, 2.4, 0.2 * rng.gen_range(-1.0..1.0)),
        ];
        let shading_normals = std::array::from_fn(|_| {
            (Vec3::new(0.0, 0.0, 1.0) + 0.75 * rv(rng, 1.0)).normalize()
        });
        SpecularTriangle {
            positions,
            shading_normals,
            normal_mode: NormalMode::Interpolated,
            eta_out: 1.0,
            eta_in: 1.0,
        }
    }

    #[test]
    fn frozen_chain_count_distribution() {
        // warped interpolated-normal mirrors admit varying chain counts; the
        // distribution over a fixed seed range is a regression fixture.
        let counts: Vec<usize> = (0..20u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
                let tri = warped_mirror(&mut rng);
                let seps = Separators::new(
                    Vec3::new(-0.9, -0.3, 1.2) + rv(&mut rng, 0.7),
                    Vec3::new(0.9, 0.4, 1.2) + rv(&mut rng, 0.7),
                );
                let scene = bare_scene(vec![tri]);
                let chain = match resolve_chain(ChainClass::R, &seps, &[&scene.triangles[0]]) {
                    Ok(c) => c,
                    Err(_) => return 0,
                };
                brute_force_chains(&seps, &[0], &chain, &scene, &OracleConfig::default()).len()
            })
            .collect();
        let expected = vec![1, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1, 1, 0, 1, 1, 1, 0, 0, 1, 1];
        assert_eq!(counts, expected, "chain count distribution shifted");
    }
}
