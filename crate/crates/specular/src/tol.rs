//! Every numeric tolerance and default used by the solver, pinned in one
//! place. Values are part of the crate's contract: the acceptance suite
//! references these constants rather than re-declaring its own.

/// Degenerate-triangle gate: area proxy must exceed EPS_GEOM_COEFF * scale^2,
/// where scale is the scene bounding-box diagonal.
pub const EPS_GEOM_COEFF: f64 = 1e-12;

/// Ray self-intersection offset, as a fraction of scene scale.
pub const EPS_RAY_COEFF: f64 = 1e-6;

/// Interval width at which root isolation bisection stops (absolute, in
/// barycentric units; the solve domain is [0,1] so absolute == relative).
pub const BISECT_TOL: f64 = 1e-9;

/// Number of uniform pieces for the determinant sign scan (big systems).
pub const SCAN_PIECES: usize = 100;

/// Bisection iterations per sign-changing scan piece.
pub const SCAN_BISECT_ITERS: usize = 10;

/// Residual gate coefficient for reported univariate roots:
/// |p(r)| < RESIDUAL_GATE_COEFF * max|coeff| * degree.
pub const RESIDUAL_GATE_COEFF: f64 = 1e-6;

/// Merge distance for duplicate roots.
pub const DEDUP_TOL: f64 = 1e-7;

/// |p(x)| below ENDPOINT_ZERO_COEFF * max|coeff| * degree counts as an exact
/// zero when classifying interval endpoints and critical points. Kept well
/// under the residual gate: a high-degree polynomial with many roots in [0,1]
/// legitimately has interior extrema around 1e-10 of coefficient scale, and
/// those must not classify as tangent roots.
pub const ENDPOINT_ZERO_COEFF: f64 = 1e-14;

/// A determinant whose sign flips on more than one piece in SCAN_NOISE_FLIPS
/// across the scan grid is rounding noise around an identically-zero
/// resultant (shared system factor), not a root set: legitimate resultants in
/// this degree range have at most a handful of odd-multiplicity roots in the
/// unit interval.
pub const SCAN_NOISE_FLIPS: usize = 4;

/// Relative dip factor: a sign-preserving scan piece whose midpoint
/// determinant is at least this much smaller than both endpoint magnitudes is
/// flagged as a possible missed even-multiplicity root.
pub const SCAN_DIP_FACTOR: f64 = 100.0;

/// Systems whose Bezout matrix is at most this large are solved by symbolic
/// determinant expansion + derivative-recursion isolation; larger ones use
/// the piecewise determinant sign scan.
pub const EXPAND_MAX_N: usize = 8;

/// Path-space constraint threshold on ||h x n|| / max(||h||, EPS_HALF_VECTOR).
pub const THETA_CONSTRAINT: f64 = 1e-4;

/// Floor for the half-vector norm in the constraint ratio (an index-matched
/// refraction has h == 0 and is trivially admissible).
pub const EPS_HALF_VECTOR: f64 = 1e-9;

/// Cheap residual pre-filter on |a|, |b| at candidate roots (unit-scaled
/// coefficients), applied before path-space validation.
pub const PREFILTER_RESIDUAL: f64 = 1e-5;

/// Back-substitution isolates u on [DOMAIN_MARGIN_LO, DOMAIN_MARGIN_HI];
/// the margin keeps roots that only just leave the simplex, which validation
/// then classifies.
pub const U_INTERVAL_LO: f64 = -0.1;
pub const U_INTERVAL_HI: f64 = 1.1;

/// Slack on the inside-simplex test during validation.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// |kappa| below this (unit-scaled mapping denominator) marks a candidate as
/// an artifact of the rational mapping's pole and rejects it.
pub const KAPPA_EXCLUSION: f64 = 1e-8;

/// A coefficient slice whose max |coeff| is below this (relative to the
/// system polynomial's unit scale) counts as identically zero during
/// back-substitution.
pub const ZERO_SLICE: f64 = 1e-10;

/// A constructed constraint polynomial whose max |coeff| is below this times
/// the natural scale of its inputs counts as degenerate, triggering the
/// basis/tangent fallback (and an error if the fallback degenerates too).
pub const DEGENERATE_POLY: f64 = 1e-10;

/// Default Newton polish iterations (refinement of located roots only).
pub const POLISH_ITERS: usize = 1;

/// Newton refinement steps applied to scan-path candidates to recover the
/// precision the 10-iteration piece bisection leaves on the table.
pub const SCAN_REFINE_STEPS: usize = 2;

/// Piecewise-rational sqrt surrogate: number of pieces and certified max
/// absolute error on [0, 1].
pub const SQRT_PIECES: usize = 6;
pub const SQRT_FIT_TOL: f64 = 1e-3;

/// Oracle defaults.
pub const ORACLE_GRID_N: usize = 256;
pub const ORACLE_REFINE_ITERS: usize = 30;
pub const ORACLE_CLUSTER_TOL: f64 = 1e-6;
pub const ORACLE_RESIDUAL_GATE: f64 = 1e-8;

/// Solution-set matching tolerance (barycentric distance).
pub const MATCH_TOL: f64 = 1e-5;

/// Per-pixel render watchdog (milliseconds).
pub const WATCHDOG_MS: u64 = 50;

/// Largest allowed render resolution per axis.
pub const MAX_RESOLUTION: u32 = 2048;
