//! Univariate real-root machinery.
//!
//! Two isolation strategies share one result type:
//!   * derivative recursion + bisection for explicit polynomials — the roots
//!     of p' split the interval into monotonic pieces, each holding at most
//!     one root, which bisection then pins down;
//!   * a piecewise sign scan for matrix-polynomial determinants that are too
//!     large to expand symbolically — uniform pieces, bisection on each
//!     sign-changing piece, plus dip diagnostics for the even-multiplicity
//!     roots a sign scan cannot see.
//!
//! Back-substitution slices the bivariate system at a fixed v and reuses the
//! explicit-polynomial path for u; a damped 2D Newton step refines located
//! roots (never searches for new ones).

use crate::poly::{BivariatePolynomial, UnivariatePolynomial};
use crate::resultant::{det_eval, det_eval_sample, expand_determinant, DetSample, ResultantMatrix};
use crate::tol;

/// How a batch of roots was located.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RootMethod {
    /// Derivative-recursion isolation on an explicit polynomial.
    Isolation,
    /// Uniform sign scan over a determinant that was only evaluated, not
    /// expanded.
    PiecewiseScan,
}

/// Sorted root batch with per-root residuals and scan diagnostics.
#[derive(Clone, Debug)]
pub struct RootList {
    pub roots: Vec<f64>,
    pub method: RootMethod,
    /// |f(root)| per root, same order as `roots`.
    pub residuals: Vec<f64>,
    /// Scan only: some sign-preserving piece showed a deep magnitude dip or a
    /// grid-point zero without a sign change — an even-multiplicity root may
    /// have been missed or only grazed.
    pub scan_miss_risk: bool,
    /// Scan only: the determinant was numerically zero across the whole grid.
    pub degenerate: bool,
}

impl RootList {
    fn new(method: RootMethod) -> Self {
        RootList {
            roots: Vec::new(),
            method,
            residuals: Vec::new(),
            scan_miss_risk: false,
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Sorts by root and merges pairs closer than `dedup_tol`, keeping the
    /// smaller-residual member of each cluster.
    fn sorted_deduped(mut self, dedup_tol: f64) -> Self {
        let mut pairs: Vec<(f64, f64)> =
            self.roots.iter().copied().zip(self.residuals.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (r, res) in pairs {
            match merged.last_mut() {
                Some(last) if (r - last.0).abs() < dedup_tol => {
                    if res < last.1 {
                        *last = (r, res);
                    }
                }
                _ => merged.push((r, res)),
            }
        }
        self.roots = merged.iter().map(|p| p.0).collect();
        self.residuals = merged.iter().map(|p| p.1).collect();
        self
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RootfindError {
    #[error("cannot isolate roots of the identically-zero polynomial")]
    IdenticallyZero,
    #[error("both system polynomials vanish identically on the slice v = {v}")]
    DegenerateSlice { v: f64 },
}

/// Solver knobs; the defaults are the shipping configuration.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    /// Uniform pieces for the determinant sign scan.
    pub pieces: usize,
    /// Bisection iterations per sign-changing scan piece.
    pub bisect_iters: usize,
    /// Stop width for isolation bisection (absolute, in barycentric units).
    pub bisect_tol: f64,
    /// Damped Newton refinement iterations applied to validated candidates.
    pub polish_iters: usize,
    /// When refinement runs: always, never, or only for chains whose systems
    /// are approximate (those containing a refraction).
    pub polish: PolishMode,
    /// Merge distance for duplicate roots.
    pub dedup_tol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolishMode {
    On,
    Off,
    /// Polish refraction chains (approximate systems), skip pure reflection.
    Auto,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            pieces: tol::SCAN_PIECES,
            bisect_iters: tol::SCAN_BISECT_ITERS,
            bisect_tol: tol::BISECT_TOL,
            polish_iters: tol::POLISH_ITERS,
            polish: PolishMode::Auto,
            dedup_tol: tol::DEDUP_TOL,
        }
    }
}

/// All simple real roots of `p` in [lo, hi], each bisected to width `tol`.
///
/// Critical points come from recursively isolating p'; every monotonic piece
/// holds at most one root. Endpoints and critical points where |p| is zero to
/// machine scale count as roots. Reported roots pass the residual gate
/// |p(r)| < 1e-6 * max|coeff| * deg and are deduplicated to 1e-7 separation.
pub fn isolate_roots(
    p: &UnivariatePolynomial,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<RootList, RootfindError> {
    if p.is_zero() {
        return Err(RootfindError::IdenticallyZero);
    }
    assert!(lo.is_finite() && hi.is_finite() && lo < hi, "bad interval [{lo}, {hi}]");
    let mut out = RootList::new(RootMethod::Isolation);
    let deg = p.degree();
    if deg == 0 {
        return Ok(out);
    }
    let scale = p.max_abs_coeff();
    let zero_eps = tol::ENDPOINT_ZERO_COEFF * scale * deg as f64;
    let gate = tol::RESIDUAL_GATE_COEFF * scale * deg as f64;

    // breakpoints: interval ends plus the critical points of p
    let mut breaks = vec![lo, hi];
    if deg >= 2 {
        let dp = p.derivative();
        if !dp.is_zero() {
            breaks.extend(isolate_roots(&dp, lo, hi, tol)?.roots);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < tol);

    let push = |r: f64, out: &mut RootList| {
        let res = p.eval_accurate(r).abs();
        if res < gate {
            out.roots.push(r);
            out.residuals.push(res);
        }
    };

    // breakpoints that are themselves zeros
    for &x in &breaks {
        if p.eval_accurate(x).abs() <= zero_eps {
            push(x, &mut out);
        }
    }
    // one bisection per monotonic piece with a strict sign change
    for w in breaks.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (p.eval_accurate(a), p.eval_accurate(b));
        if fa.abs() <= zero_eps || fb.abs() <= zero_eps || fa.signum() == fb.signum() {
            continue;
        }
        let mut fa = fa;
        while b - a > tol {
            let m = 0.5 * (a + b);
            let fm = p.eval_accurate(m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        push(0.5 * (a + b), &mut out);
    }
    Ok(out.sorted_deduped(tol::DEDUP_TOL))
}

/// Candidate zeros of det R(v) on [0,1] by uniform sign scan.
///
/// Each of cfg.pieces pieces whose endpoint determinants differ in sign is
/// bisected cfg.bisect_iters times; when the matrix is small enough to expand
/// symbolically, each candidate then gets two damped Newton steps on the
/// expanded determinant to recover the precision the fixed-depth bisection
/// leaves behind. Sign-preserving pieces with a deep magnitude dip set
/// `scan_miss_risk`.
///
/// There is deliberately no smallness threshold: the determinant of an n x n
/// matrix scales like the n-th power of its pivot sizes, so any absolute or
/// grid-relative cutoff misclassifies healthy large systems whose determinants
/// legitimately span dozens of orders of magnitude. Candidates come from exact
/// zeros and sign changes only; tangencies are reported through the ratio dip
/// diagnostic. A determinant that is zero at every grid point, or whose sign
/// flips on more than a quarter of the pieces (rounding noise around an
/// identically-zero resultant, e.g. a shared factor between the two system
/// polynomials), sets `degenerate` and yields no candidates.
pub fn det_zero_scan(r: &ResultantMatrix, cfg: &SolverConfig) -> RootList {
    let mut out = RootList::new(RootMethod::PiecewiseScan);
    let p = cfg.pieces.max(1);
    let xs: Vec<f64> = (0..=p).map(|i| i as f64 / p as f64).collect();
    let dets: Vec<DetSample> = xs.iter().map(|&x| det_eval_sample(&r.matrix, x)).collect();

    if dets.iter().all(|d| d.is_zero()) {
        out.degenerate = true;
        return out;
    }

    let sign = |i: usize| -> i8 { dets[i].sign() };

    let flips = (0..p)
        .filter(|&i| sign(i) != 0 && sign(i + 1) != 0 && sign(i) != sign(i + 1))
        .count();
    if tol::SCAN_NOISE_FLIPS * flips > p {
        out.degenerate = true;
        return out;
    }

    let expanded = if r.n() <= tol::EXPAND_MAX_N {
        expand_determinant(&r.matrix).ok()
    } else {
        None
    };
    let piece_w = 1.0 / p as f64;

    let refine = |x0: f64| -> f64 {
        let Some(poly) = &expanded else { return x0 };
        let dp = poly.derivative();
        let mut x = x0;
        let mut fx = poly.eval(x).abs();
        for _ in 0..tol::SCAN_REFINE_STEPS {
            let d = dp.eval(x);
            if d.abs() < f64::MIN_POSITIVE.sqrt() {
                break;
            }
            let step = poly.eval(x) / d;
            let xn = x - step;
            let fn_ = poly.eval(xn).abs();
            if step.abs() <= piece_w && fn_ <= fx {
                x = xn;
                fx = fn_;
            } else {
                break;
            }
        }
        x
    };

    let push = |x: f64, out: &mut RootList| {
        let x = refine(x);
        out.roots.push(x);
        out.residuals.push(det_eval(&r.matrix, x).abs());
    };

    // grid points that are zeros in their own right
    for i in 0..=p {
        if sign(i) == 0 {
            push(xs[i], &mut out);
            // zero without a surrounding sign change: tangency suspected
            if i > 0 && i < p && sign(i - 1) == sign(i + 1) && sign(i - 1) != 0 {
                out.scan_miss_risk = true;
            }
        }
    }

    for i in 0..p {
        let (s0, s1) = (sign(i), sign(i + 1));
        if s0 == 0 || s1 == 0 {
            continue; // handled as grid zeros
        }
        if s0 != s1 {
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let sa = s0;
            for _ in 0..cfg.bisect_iters {
                let m = 0.5 * (a + b);
                let sm = det_eval_sample(&r.matrix, m).sign();
                if sm == 0 {
                    a = m;
                    b = m;
                    break;
                }
                if sm == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            push(0.5 * (a + b), &mut out);
        } else {
            // same sign: look for a dip that suggests a grazed double root
            let m = 0.5 * (xs[i] + xs[i + 1]);
            let dm = det_eval_sample(&r.matrix, m);
            if dm.is_zero() {
                push(m, &mut out);
                out.scan_miss_risk = true;
            } else {
                let floor = dets[i].log2_abs().min(dets[i + 1].log2_abs());
                if dm.log2_abs() + tol::SCAN_DIP_FACTOR.log2() <= floor {
                    out.scan_miss_risk = true;
                }
            }
        }
    }
    out.sorted_deduped(cfg.dedup_tol)
}

/// Solves a(u, v1) = 0 for u on the margined interval [-0.1, 1.1].
///
/// A slice that vanishes identically (its coefficients are zero relative to
/// the parent polynomial's scale) falls back to slicing `b`; if both vanish
/// the system is degenerate at this v1 and the caller should skip it.
pub fn back_substitute(
    a: &BivariatePolynomial,
    b: &BivariatePolynomial,
    v1: f64,
    tol_bisect: f64,
) -> Result<RootList, RootfindError> {
    let pick = |p: &BivariatePolynomial| -> Option<UnivariatePolynomial> {
        let slice = p.slice_at_v(v1);
        let parent = p.max_abs_coeff();
        if slice.max_abs_coeff() > tol::ZERO_SLICE * parent.max(f64::MIN_POSITIVE) {
            Some(slice)
        } else {
            None
        }
    };
    let slice = match pick(a).or_else(|| pick(b)) {
        Some(s) => s,
        None => return Err(RootfindError::DegenerateSlice { v: v1 }),
    };
    let slice = slice.normalize_max().expect("nonzero slice");
    isolate_roots(&slice, tol::U_INTERVAL_LO, tol::U_INTERVAL_HI, tol_bisect)
}

/// Up to `iters` damped Newton steps on F = (a, b) from (u, v).
///
/// This refines an already-located root; it never searches. A step doubles
/// back (halves, up to 6 times) while it would increase ||F||; a singular
/// Jacobian aborts with the current point and `false`.
pub fn newton_polish_2d(
    a: &BivariatePolynomial,
    b: &BivariatePolynomial,
    u: f64,
    v: f64,
    iters: usize,
) -> (f64, f64, bool) {
    let (au, av) = (a.derivative_u(), a.derivative_v());
    let (bu, bv) = (b.derivative_u(), b.derivative_v());
    let (mut u, mut v) = (u, v);
    for _ in 0..iters {
        let f = (a.eval(u, v), b.eval(u, v));
        let j = [au.eval(u, v), av.eval(u, v), bu.eval(u, v), bv.eval(u, v)];
        let det = j[0] * j[3] - j[1] * j[2];
        let jscale = j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if det.abs() <= 1e-14 * jscale * jscale + f64::MIN_POSITIVE {
            return (u, v, false);
        }
        let du = (f.0 * j[3] - f.1 * j[1]) / det;
        let dv = (j[0] * f.1 - j[2] * f.0) / det;
        let norm0 = f.0.hypot(f.1);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..7 {
            let (un, vn) = (u - t * du, v - t * dv);
            let fn_ = a.eval(un, vn).hypot(b.eval(un, vn));
            if fn_ <= norm0 {
                u = un;
                v = vn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // already at a local minimum of ||F||; keep the point
        }
    }
    (u, v, true)
}
