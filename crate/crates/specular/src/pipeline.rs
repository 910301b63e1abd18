//! The end-to-end chain solve.
//!
//! Three phases per triangle tuple, mirrored in the report timings:
//!
//! 1. **coefficient** — resolve the chain events and build the bivariate
//!    constraint system;
//! 2. **elimination** — Bezout matrix, real determinant roots in v (symbolic
//!    expansion plus isolation for small matrices, the piecewise sign scan
//!    otherwise), then back-substitution for u;
//! 3. **path** — reconstruct the world-space path for every candidate root
//!    and validate it: domain membership, the specular law at each vertex,
//!    sidedness, clearing-pole exclusion, and segment visibility.
//!
//! Every extracted candidate lands in exactly one report bucket (superfluous,
//! domain-rejected, occluded, admissible), so the bucket counts telescope
//! back to the root count. Tuples are independent work items merged in
//! enumeration order, which keeps results bit-identical across thread counts.

use crate::polynomialize::{
    build_system, build_system_with_fit, resolve_chain, ChainClass, ChainType, ScatterKind,
    SpecularSystem, SqrtApprox,
};
use crate::resultant::{bezout_matrix, expand_determinant};
use crate::rootfind::{back_substitute, det_zero_scan, isolate_roots, PolishMode, SolverConfig};
use crate::scene::{
    BarycentricCoord, NormalMode, Scene, Separators, SpecularTriangle, TriId, Vec3,
};
use crate::tol;
use rayon::prelude::*;
use std::time::{Duration, Instant};

/// Enumeration caps. Tuples are enumerated exhaustively (every ordered
/// tuple, repeats included), which is quadratic for two-bounce chains; the
/// caps keep that honest instead of silently degrading.
pub const MAX_TRIS_ONE_BOUNCE: usize = 512;
pub const MAX_TRIS_TWO_BOUNCE: usize = 64;

/// Validation outcome flags. A chain is admissible exactly when all four are
/// set and the recorded residual clears the constraint gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChainFlags {
    /// Every vertex lies inside its triangle (with boundary slack).
    pub domain_ok: bool,
    /// The path reconstructed, respects the specular law at every vertex
    /// within the constraint gate, and scatters to the correct side.
    pub constraint_ok: bool,
    /// No occluder or foreign specular triangle blocks any segment.
    pub visible: bool,
    /// The refinement stage completed: either no polish was requested for
    /// this chain, or the damped Newton refinement converged.
    pub polished: bool,
}

/// One fully validated specular chain between the two separator endpoints.
#[derive(Clone, Debug)]
pub struct SpecularChain {
    /// Specular-triangle indices in event order.
    pub tuple: Vec<usize>,
    pub chain: ChainType,
    /// Barycentric coordinates of each specular vertex.
    pub bcs: Vec<BarycentricCoord>,
    /// World positions: start endpoint, the specular vertices, far endpoint.
    pub vertices: Vec<Vec3>,
    /// Worst per-vertex specular-law violation: |h x n| / max(|h|, eps) with
    /// h the scaled-direction difference (generalized half-vector direction).
    pub residual: f64,
    pub flags: ChainFlags,
}

impl SpecularChain {
    pub fn admissible(&self) -> bool {
        self.flags.domain_ok
            && self.flags.constraint_ok
            && self.flags.visible
            && self.flags.polished
            && self.residual < tol::THETA_CONSTRAINT
    }
}

/// Wall-clock time per solve phase, accumulated over tuples.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseTimings {
    /// System construction (chain resolution + coefficient assembly).
    pub coefficient: Duration,
    /// Resultant matrix construction and, on the expansion path, symbolic
    /// determinant expansion.
    pub determinant: Duration,
    /// Hidden-variable root isolation: bisection on the expanded
    /// determinant, or the piecewise sign scan.
    pub roots_v: Duration,
    /// Back-substitution for u at each v root.
    pub roots_u: Duration,
    /// Candidate classification and path validation.
    pub path: Duration,
}

impl PhaseTimings {
    fn merge(&mut self, o: &PhaseTimings) {
        self.coefficient += o.coefficient;
        self.determinant += o.determinant;
        self.roots_v += o.roots_v;
        self.roots_u += o.roots_u;
        self.path += o.path;
    }

    /// Sum over all phases.
    pub fn total(&self) -> Duration {
        self.coefficient + self.determinant + self.roots_v + self.roots_u + self.path
    }
}

/// Counters for one solve run. All counts are exact and deterministic;
/// only the timings vary between runs.
#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub tuples_examined: usize,
    pub systems_built: usize,
    /// Tuples abandoned because construction or elimination degenerated
    /// (zero constraint, identically-zero resultant, ...). Diagnostic only;
    /// such tuples contribute no candidates.
    pub degenerate_tuples: usize,
    /// Candidate (u, v) pairs extracted from the resultants.
    pub resultant_roots: usize,
    /// Candidates rejected as artifacts: elimination ghosts, clearing-pole
    /// roots, wrong-side or wrong-ordering solutions, law violations, and
    /// duplicates of an already-accepted chain.
    pub superfluous: usize,
    /// Candidates whose vertices left the triangle domain.
    pub domain_rejected: usize,
    /// Geometrically valid chains blocked by scene geometry.
    pub occluded: usize,
    pub admissible: usize,
    /// Sign scans that flagged a possible even-multiplicity root miss.
    pub scan_miss_flags: usize,
    /// Damped-Newton invocations. Refinement only ever starts from an
    /// already-extracted candidate, so this is bounded by two invocations
    /// (scan sharpening + polish) per resultant root.
    pub polish_runs: usize,
    pub timings: PhaseTimings,
}

impl SolveReport {
    pub fn merge(&mut self, o: &SolveReport) {
        self.tuples_examined += o.tuples_examined;
        self.systems_built += o.systems_built;
        self.degenerate_tuples += o.degenerate_tuples;
        self.resultant_roots += o.resultant_roots;
        self.superfluous += o.superfluous;
        self.domain_rejected += o.domain_rejected;
        self.occluded += o.occluded;
        self.admissible += o.admissible;
        self.scan_miss_flags += o.scan_miss_flags;
        self.polish_runs += o.polish_runs;
        self.timings.merge(&o.timings);
    }

    /// Every candidate root must land in exactly one bucket.
    pub fn balanced(&self) -> bool {
        self.resultant_roots
            == self.superfluous + self.domain_rejected + self.occluded + self.admissible
    }

    /// Structured text summary (used verbatim by the CLI).
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("tuples examined    {}\n", self.tuples_examined));
        s.push_str(&format!("systems built      {}\n", self.systems_built));
        s.push_str(&format!("degenerate tuples  {}\n", self.degenerate_tuples));
        s.push_str(&format!("resultant roots    {}\n", self.resultant_roots));
        s.push_str(&format!("  superfluous      {}\n", self.superfluous));
        s.push_str(&format!("  domain rejected  {}\n", self.domain_rejected));
        s.push_str(&format!("  occluded         {}\n", self.occluded));
        s.push_str(&format!("  admissible       {}\n", self.admissible));
        s.push_str(&format!("scan miss flags    {}\n", self.scan_miss_flags));
        s.push_str(&format!("polish runs        {}\n", self.polish_runs));
        s.push_str(&format!(
            "root accounting    {}\n",
            if self.balanced() { "balanced" } else { "UNBALANCED" }
        ));
        s.push_str(&format!(
            "timings            poly {:.3?}  det {:.3?}  sol v1 {:.3?}  sol u1 {:.3?}  path {:.3?}\n",
            self.timings.coefficient,
            self.timings.determinant,
            self.timings.roots_v,
            self.timings.roots_u,
            self.timings.path
        ));
        s
    }
}

/// All ordered tuples of specular-triangle indices for the class, repeats
/// included, in lexicographic order.
///
/// With `cull` set, one-bounce tuples whose triangle provably cannot host an
/// admissible vertex are dropped. The test is the half-space argument on
/// face-normal triangles: a mirror scatters back into the incident
/// half-space, so both endpoints must sit on the same side of the plane,
/// while an interface transmits across it, so they must not. Triangles with
/// interpolated normals and all two-bounce tuples are never culled (no
/// comparably cheap bound is sound there).
pub fn enumerate_tuples(
    scene: &Scene,
    seps: &Separators,
    class: ChainClass,
    cull: bool,
) -> Vec<Vec<usize>> {
    let n = scene.triangles.len();
    let k = class.vertex_count();
    match k {
        1 => assert!(
            n <= MAX_TRIS_ONE_BOUNCE,
            "one-bounce enumeration capped at {MAX_TRIS_ONE_BOUNCE} triangles (scene has {n})"
        ),
        _ => assert!(
            n <= MAX_TRIS_TWO_BOUNCE,
            "two-bounce enumeration capped at {MAX_TRIS_TWO_BOUNCE} triangles (scene has {n})"
        ),
    }
    let keep = |i: usize| -> bool {
        if !cull || k != 1 {
            return true;
        }
        let tri = &scene.triangles[i];
        if tri.normal_mode != NormalMode::Face {
            return true;
        }
        let nrm = tri.geometric_normal();
        let s0 = (seps.x0 - tri.positions[0]).dot(&nrm);
        let s1 = (seps.x_k1 - tri.positions[0]).dot(&nrm);
        match class.kinds()[0] {
            // reflection needs both endpoints strictly on one side
            ScatterKind::Reflect => s0 * s1 >= 0.0,
            // transmission needs the endpoints on opposite sides
            ScatterKind::Refract => s0 * s1 <= 0.0,
        }
    };
    match k {
        1 => (0..n).filter(|&i| keep(i)).map(|i| vec![i]).collect(),
        2 => (0..n)
            .flat_map(|i| (0..n).map(move |j| vec![i, j]))
            .collect(),
        _ => unreachable!("chains have one or two vertices"),
    }
}

/// Why a candidate was filed where it was.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bucket {
    Superfluous,
    Domain,
    Occluded,
    Admissible,
}

/// Exact mirror direction (un-normalized in, un-normalized normal).
fn reflect_exact(d: Vec3, n: Vec3) -> Vec3 {
    let nn = n.normalize();
    d - nn * (2.0 * d.dot(&nn))
}

/// Exact transmitted direction for incoming `d` across a surface with normal
/// `n` and index ratio `eta_ratio` = eta_in / eta_out along the propagation.
/// `None` on total internal reflection. The normal's orientation is
/// irrelevant; it is flipped to oppose the incoming direction internally.
fn refract_exact(d: Vec3, n: Vec3, eta_ratio: f64) -> Option<Vec3> {
    let w = d.normalize();
    let mut nn = n.normalize();
    let mut cos_i = -w.dot(&nn);
    if cos_i < 0.0 {
        nn = -nn;
        cos_i = -cos_i;
    }
    let sin2_t = eta_ratio * eta_ratio * (1.0 - cos_i * cos_i);
    if sin2_t > 1.0 {
        return None;
    }
    let cos_t = (1.0 - sin2_t).sqrt();
    Some(w * eta_ratio + nn * (eta_ratio * cos_i - cos_t))
}

/// Reconstructed world-space path for a first-vertex coordinate.
struct PathGeom {
    bcs: Vec<BarycentricCoord>,
    /// x0, specular vertices, far endpoint.
    vertices: Vec<Vec3>,
}

/// Propagates the path from the first vertex: evaluates the scatter law
/// there exactly and intersects the outgoing ray with the second triangle's
/// plane (two-bounce only). This evaluates the same rational coordinate map
/// the polynomial system cleared, at the candidate point.
fn propagate(
    seps: &Separators,
    tris: &[&SpecularTriangle],
    chain: &ChainType,
    bc1: BarycentricCoord,
) -> Result<PathGeom, &'static str> {
    let x1 = tris[0].interpolate_position(bc1);
    let mut bcs = vec![bc1];
    let mut vertices = vec![seps.x0, x1];
    if tris.len() == 2 {
        let d0 = x1 - seps.x0;
        let n1 = tris[0].interpolate_normal(bc1);
        if d0.norm() == 0.0 || n1.norm() == 0.0 {
            return Err("degenerate first vertex");
        }
        let d1 = match chain.events[0].kind {
            ScatterKind::Reflect => reflect_exact(d0, n1),
            ScatterKind::Refract => refract_exact(d0, n1, chain.events[0].eta_ratio())
                .ok_or("total internal reflection at the first vertex")?,
        };
        let e1 = tris[1].edge1();
        let e2 = tris[1].edge2();
        let p = d1.cross(&e2);
        let det = p.dot(&e1);
        let scale = d1.norm() * e1.norm() * e2.norm();
        if det.abs() <= tol::KAPPA_EXCLUSION * scale {
            return Err("outgoing ray parallel to the second triangle");
        }
        let tv = x1 - tris[1].positions[0];
        let q = tv.cross(&e1);
        let u2 = tv.dot(&p) / det;
        let v2 = d1.dot(&q) / det;
        let t = e2.dot(&q) / det;
        if t <= 0.0 {
            return Err("second vertex behind the outgoing ray");
        }
        let bc2 = BarycentricCoord::new(u2, v2);
        bcs.push(bc2);
        vertices.push(tris[1].interpolate_position(bc2));
    }
    vertices.push(seps.x_k1);
    Ok(PathGeom { bcs, vertices })
}

/// Specular-law check over a reconstructed path: worst per-vertex residual
/// |h x n| / max(|h|, eps) and whether every vertex scatters to the correct
/// side (reflection back into the incident half-space, transmission across).
fn law_residual(geom: &PathGeom, tris: &[&SpecularTriangle], chain: &ChainType) -> (f64, bool) {
    let mut worst = 0.0f64;
    let mut sides_ok = true;
    for i in 0..tris.len() {
        let w_in = (geom.vertices[i + 1] - geom.vertices[i]).normalize();
        let w_out = (geom.vertices[i + 2] - geom.vertices[i + 1]).normalize();
        let n = tris[i].interpolate_normal(geom.bcs[i]).normalize();
        let ev = chain.events[i];
        let h = w_out * ev.eta_next - w_in * ev.eta_prev;
        let resid = h.cross(&n).norm() / h.norm().max(tol::EPS_HALF_VECTOR);
        worst = worst.max(resid);
        let (ci, co) = (w_in.dot(&n), w_out.dot(&n));
        sides_ok &= match ev.kind {
            ScatterKind::Reflect => ci * co < 0.0,
            ScatterKind::Refract => ci * co > 0.0,
        };
    }
    (worst, sides_ok)
}

/// Per-segment visibility with the segment-adjacent specular triangles
/// excluded from the occlusion query.
fn segments_visible(geom: &PathGeom, tuple: &[usize], scene: &Scene) -> bool {
    let k = tuple.len();
    for s in 0..geom.vertices.len() - 1 {
        let mut ignore: Vec<TriId> = Vec::with_capacity(2);
        if s > 0 {
            ignore.push(TriId::Specular(tuple[s - 1]));
        }
        if s < k {
            ignore.push(TriId::Specular(tuple[s]));
        }
        if !scene.visible(geom.vertices[s], geom.vertices[s + 1], &ignore) {
            return false;
        }
    }
    true
}

/// Validates a first-vertex coordinate as a full path, with no reference to
/// the polynomial system it came from: reconstructs the path, checks domain
/// membership, the specular law, sidedness, and visibility. `polished`
/// reports whatever the caller passes (solver-produced candidates record
/// their refinement outcome; direct calls pass `true`).
pub fn validate_path(
    seps: &Separators,
    tuple: &[usize],
    chain: &ChainType,
    bc1: BarycentricCoord,
    scene: &Scene,
    polished: bool,
) -> SpecularChain {
    let tris: Vec<&SpecularTriangle> = tuple.iter().map(|&i| &scene.triangles[i]).collect();
    let mut out = SpecularChain {
        tuple: tuple.to_vec(),
        chain: chain.clone(),
        bcs: vec![bc1],
        vertices: vec![seps.x0, tris[0].interpolate_position(bc1), seps.x_k1],
        residual: f64::INFINITY,
        flags: ChainFlags {
            polished,
            ..ChainFlags::default()
        },
    };
    let geom = match propagate(seps, &tris, chain, bc1) {
        Ok(g) => g,
        Err(_) => return out, // constraint_ok stays false
    };
    out.bcs = geom.bcs.clone();
    out.vertices = geom.vertices.clone();
    out.flags.domain_ok = geom.bcs.iter().all(|bc| bc.inside(tol::DOMAIN_SLACK));
    let (resid, sides_ok) = law_residual(&geom, &tris, chain);
    out.residual = resid;
    out.flags.constraint_ok = sides_ok && resid < tol::THETA_CONSTRAINT;
    out.flags.visible = segments_visible(&geom, tuple, scene);
    out
}

/// Relative refraction radicand at the first vertex, as a fraction of its
/// reflection-limit bound: (1 - r^2) + r^2 cos^2(theta_i). This is the value
/// the sqrt surrogate approximates, so it centers the re-anchored fit.
fn radicand_fraction(seps: &Separators, tri: &SpecularTriangle, bc: BarycentricCoord, r: f64) -> f64 {
    let d = (tri.interpolate_position(bc) - seps.x0).normalize();
    let n = tri.interpolate_normal(bc).normalize();
    let c = d.dot(&n);
    ((1.0 - r * r) + r * r * c * c).clamp(0.0, 1.0)
}

/// One candidate's journey through the path phase.
fn classify_candidate(
    seps: &Separators,
    tuple: &[usize],
    tris: &[&SpecularTriangle],
    chain: &ChainType,
    sys: &SpecularSystem,
    u0: f64,
    v0: f64,
    from_scan: bool,
    accepted: &[SpecularChain],
    cfg: &SolverConfig,
    scene: &Scene,
    polish_runs: &mut usize,
) -> (Option<SpecularChain>, Bucket) {
    let (mut u, mut v) = (u0, v0);

    // Scan roots are only bisection-localized; sharpen them against the
    // system before judging anything.
    if from_scan {
        let (u1, v1, _) = sys.polish(u, v, tol::SCAN_REFINE_STEPS);
        *polish_runs += 1;
        (u, v) = (u1, v1);
    }

    // Cheap algebraic pre-filter: a candidate that does not nearly satisfy
    // the conditioned system is an elimination ghost.
    if !sys.residual(u, v).is_finite() || sys.residual(u, v) > tol::PREFILTER_RESIDUAL {
        return (None, Bucket::Superfluous);
    }

    // Clearing-pole exclusion: roots introduced by the cleared denominators.
    if let Some(kv) = sys.kappa_at(u, v) {
        if kv < tol::KAPPA_EXCLUSION {
            return (None, Bucket::Superfluous);
        }
    }

    // Domain check before spending any refinement on the candidate.
    if !BarycentricCoord::new(u, v).inside(tol::DOMAIN_SLACK) {
        let chain_out = validate_path(seps, tuple, chain, BarycentricCoord::new(u, v), scene, true);
        return (Some(chain_out), Bucket::Domain);
    }

    // Refinement. Chains built on the sqrt surrogate get their system
    // rebuilt with a fit tangent at the candidate's radicand first, which
    // removes the global surrogate error from the final position.
    let wants_polish = match cfg.polish {
        PolishMode::On => true,
        PolishMode::Off => false,
        PolishMode::Auto => chain.events.iter().any(|e| e.kind == ScatterKind::Refract),
    };
    let mut polish_ok = true;
    if wants_polish {
        if sys.sqrt_piece.is_some() {
            let s = radicand_fraction(seps, tris[0], BarycentricCoord::new(u, v), chain.events[0].eta_ratio());
            let refit = SqrtApprox::tangent_at(s);
            match build_system_with_fit(seps, tris, chain, &refit) {
                Ok(sys2) => {
                    // Two steps: the first mostly transports the candidate
                    // onto the re-anchored system, the second converges.
                    let iters = cfg.polish_iters.max(2);
                    let (u1, v1, ok) = sys2.polish(u, v, iters);
                    *polish_runs += 1;
                    (u, v, polish_ok) = (u1, v1, ok);
                }
                Err(_) => polish_ok = false,
            }
        } else {
            let (u1, v1, ok) = sys.polish(u, v, cfg.polish_iters);
            *polish_runs += 1;
            (u, v, polish_ok) = (u1, v1, ok);
        }
    }

    let chain_out = validate_path(
        seps,
        tuple,
        chain,
        BarycentricCoord::new(u, v),
        scene,
        polish_ok,
    );

    // Duplicate of an already-accepted chain (e.g. both halves of a
    // tangency pair converging to one point).
    let dup = accepted.iter().any(|c| {
        let db = c.bcs[0];
        (db.u - chain_out.bcs[0].u).hypot(db.v - chain_out.bcs[0].v) < tol::DEDUP_TOL
    });

    let bucket = if !chain_out.flags.domain_ok {
        Bucket::Domain
    } else if dup || !chain_out.flags.constraint_ok || !chain_out.flags.polished {
        Bucket::Superfluous
    } else if !chain_out.flags.visible {
        Bucket::Occluded
    } else {
        Bucket::Admissible
    };
    (Some(chain_out), bucket)
}

/// Solves one triangle tuple: builds the system, extracts every real
/// candidate root of its resultant, validates each in path space, and
/// returns the admissible chains plus the full accounting.
///
/// Degenerate configurations (zero constraints, identically-zero resultants,
/// vanishing slices) produce an empty result and a diagnostic count — never
/// an error or a crash.
pub fn solve_tuple(
    seps: &Separators,
    tuple: &[usize],
    chain: &ChainType,
    cfg: &SolverConfig,
    scene: &Scene,
) -> (Vec<SpecularChain>, SolveReport) {
    let mut report = SolveReport {
        tuples_examined: 1,
        ..SolveReport::default()
    };
    let tris: Vec<&SpecularTriangle> = tuple.iter().map(|&i| &scene.triangles[i]).collect();

    // --- coefficient phase ---
    let t0 = Instant::now();
    let sys = match build_system(seps, &tris, chain) {
        Ok(s) => s,
        Err(_) => {
            report.degenerate_tuples += 1;
            report.timings.coefficient += t0.elapsed();
            return (Vec::new(), report);
        }
    };
    report.systems_built += 1;
    report.timings.coefficient += t0.elapsed();

    // --- determinant phase ---
    let t1 = Instant::now();
    let rm = match bezout_matrix(&sys.a, &sys.b) {
        Ok(m) => m,
        Err(_) => {
            report.degenerate_tuples += 1;
            report.timings.determinant += t1.elapsed();
            return (Vec::new(), report);
        }
    };
    let expanded = if rm.n() <= tol::EXPAND_MAX_N {
        let det = expand_determinant(&rm.matrix).expect("size-capped expansion");
        match det.normalize_max() {
            Ok(d) => Some(d),
            Err(_) => {
                // identically-zero resultant: common factor, no information
                report.degenerate_tuples += 1;
                report.timings.determinant += t1.elapsed();
                return (Vec::new(), report);
            }
        }
    } else {
        None
    };
    report.timings.determinant += t1.elapsed();

    // --- hidden-variable roots ---
    let t2 = Instant::now();
    let (v_roots, from_scan) = if let Some(det) = &expanded {
        match isolate_roots(det, 0.0, 1.0, cfg.bisect_tol) {
            Ok(list) => (list, false),
            Err(_) => {
                report.degenerate_tuples += 1;
                report.timings.roots_v += t2.elapsed();
                return (Vec::new(), report);
            }
        }
    } else {
        let list = det_zero_scan(&rm, cfg);
        if list.degenerate {
            report.degenerate_tuples += 1;
            report.timings.roots_v += t2.elapsed();
            return (Vec::new(), report);
        }
        if list.scan_miss_risk {
            report.scan_miss_flags += 1;
        }
        (list, true)
    };
    report.timings.roots_v += t2.elapsed();

    // --- back-substitution ---
    let t3 = Instant::now();
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for &v in &v_roots.roots {
        if let Ok(us) = back_substitute(&sys.a, &sys.b, v, cfg.bisect_tol) {
            candidates.extend(us.roots.iter().map(|&u| (u, v)));
        }
    }
    report.timings.roots_u += t3.elapsed();

    // --- path phase ---
    let t4 = Instant::now();
    let mut out: Vec<SpecularChain> = Vec::new();
    for (u, v) in candidates {
        report.resultant_roots += 1;
        let (chain_out, bucket) = classify_candidate(
            seps,
            tuple,
            &tris,
            chain,
            &sys,
            u,
            v,
            from_scan,
            &out,
            cfg,
            scene,
            &mut report.polish_runs,
        );
        match bucket {
            Bucket::Superfluous => report.superfluous += 1,
            Bucket::Domain => report.domain_rejected += 1,
            Bucket::Occluded => report.occluded += 1,
            Bucket::Admissible => {
                report.admissible += 1;
                out.push(chain_out.expect("admissible chains are materialized"));
            }
        }
    }
    report.timings.path += t4.elapsed();
    (out, report)
}

/// Solves every enumerated tuple of every requested class over the scene's
/// separator pair. Tuples are solved in parallel; results are merged in
/// enumeration order, so the output is identical for any thread count.
pub fn solve_scene(
    scene: &Scene,
    seps: &Separators,
    classes: &[ChainClass],
    cfg: &SolverConfig,
    cull: bool,
) -> (Vec<SpecularChain>, SolveReport) {
    let mut chains = Vec::new();
    let mut report = SolveReport::default();
    for &class in classes {
        let tuples = enumerate_tuples(scene, seps, class, cull);
        let results: Vec<(Vec<SpecularChain>, SolveReport)> = tuples
            .par_iter()
            .map(|tuple| {
                let tris: Vec<&SpecularTriangle> =
                    tuple.iter().map(|&i| &scene.triangles[i]).collect();
                match resolve_chain(class, seps, &tris) {
                    Ok(chain) => solve_tuple(seps, tuple, &chain, cfg, scene),
                    Err(_) => {
                        let mut r = SolveReport::default();
                        r.tuples_examined = 1;
                        r.degenerate_tuples = 1;
                        (Vec::new(), r)
                    }
                }
            })
            .collect();
        for (cs, r) in results {
            chains.extend(cs);
            report.merge(&r);
        }
    }
    (chains, report)
}

/// Angular half-width of the probe pencil for [`geometric_term`].
const PENCIL_ANGLE: f64 = 1e-4;

/// Geometric spread of a pencil of rays traced from the far endpoint (the
/// light side in rendering) through the chain to the start endpoint:
/// 1 / |det J| where J maps perturbation angle at the light to displacement
/// on the receiving plane (central differences, half-angle 1e-4 rad).
///
/// The flat-mirror value is 1/(d1+d2)^2 and an index-matched interface gives
/// 1/d^2 — inverse-square falloff along the unfolded path — while curved
/// (interpolated-normal) vertices focus or spread the pencil accordingly.
/// Returns 0 when the trace fails or the Jacobian degenerates (a caustic
/// focus on the receiving plane), so callers can treat the result as a
/// plain multiplicative factor.
pub fn geometric_term(chain: &SpecularChain, scene: &Scene) -> f64 {
    let verts = &chain.vertices;
    let k = chain.tuple.len();
    let light = verts[k + 1];
    let first_target = verts[k];
    let receive = verts[0];

    let w0 = (first_target - light).normalize();
    // receiving plane: through the start endpoint, orthogonal to the
    // unperturbed arrival direction
    let w_arrive = (receive - verts[1]).normalize();
    let (fa, fb) = orthonormal_frame(w_arrive);
    let (ea, eb) = orthonormal_frame(w0);

    // trace the chain in reverse: last triangle first, swapped index ratios
    let trace = |dir: Vec3| -> Option<Vec3> {
        let mut origin = light;
        let mut d = dir;
        for step in 0..k {
            let ti = chain.tuple[k - 1 - step];
            let tri = &scene.triangles[ti];
            let (hit_bc, hit_pos) = plane_hit(origin, d, tri)?;
            let n = tri.interpolate_normal(hit_bc);
            let ev = chain.chain.events[k - 1 - step];
            d = match ev.kind {
                ScatterKind::Reflect => reflect_exact(d, n),
                // reversed traversal swaps the index ratio
                ScatterKind::Refract => refract_exact(d, n, ev.eta_next / ev.eta_prev)?,
            };
            origin = hit_pos;
        }
        // land on the receiving plane
        let denom = d.dot(&w_arrive);
        if denom.abs() < 1e-12 * d.norm() {
            return None;
        }
        let t = (receive - origin).dot(&w_arrive) / denom;
        if t <= 0.0 {
            return None;
        }
        Some(origin + d * t)
    };

    let rotate = |axis: Vec3, angle: f64| -> Vec3 {
        w0 * angle.cos() + axis * angle.sin()
    };
    let mut jac = [[0.0f64; 2]; 2];
    for (col, axis) in [(0, ea), (1, eb)] {
        let p_plus = trace(rotate(axis, PENCIL_ANGLE));
        let p_minus = trace(rotate(axis, -PENCIL_ANGLE));
        let (p_plus, p_minus) = match (p_plus, p_minus) {
            (Some(a), Some(b)) => (a, b),
            _ => return 0.0,
        };
        let delta = (p_plus - p_minus) / (2.0 * PENCIL_ANGLE);
        jac[0][col] = delta.dot(&fa);
        jac[1][col] = delta.dot(&fb);
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let g = 1.0 / det.abs();
    if g.is_finite() {
        g
    } else {
        0.0
    }
}

/// Two unit vectors orthogonal to `w` and each other.
fn orthonormal_frame(w: Vec3) -> (Vec3, Vec3) {
    let pick = if w.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let a = w.cross(&pick).normalize();
    let b = w.cross(&a);
    (a, b)
}

/// Ray / triangle-plane intersection without the inside-triangle clip;
/// `None` if parallel or hitting backward.
fn plane_hit(origin: Vec3, d: Vec3, tri: &SpecularTriangle) -> Option<(BarycentricCoord, Vec3)> {
    let e1 = tri.edge1();
    let e2 = tri.edge2();
    let p = d.cross(&e2);
    let det = p.dot(&e1);
    if det.abs() <= 1e-14 * d.norm() * e1.norm() * e2.norm() {
        return None;
    }
    let tv = origin - tri.positions[0];
    let q = tv.cross(&e1);
    let u = tv.dot(&p) / det;
    let v = d.dot(&q) / det;
    let t = e2.dot(&q) / det;
    if t <= 0.0 {
        return None;
    }
    Some((BarycentricCoord::new(u, v), origin + d * t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Camera, PointLight, Triangle};

    fn mirror_tri() -> SpecularTriangle {
        SpecularTriangle {
            positions: [
                Vec3::new(-2.0, -2.0, 0.0),
                Vec3::new(3.0, -2.0, 0.0),
                Vec3::new(-2.0, 3.0, 0.0),
            ],
            shading_normals: [Vec3::new(0.0, 0.0, 1.0); 3],
            normal_mode: NormalMode::Face,
            eta_out: 1.0,
            eta_in: 1.0,
        }
    }

    fn interface_tri(eta_in: f64) -> SpecularTriangle {
        SpecularTriangle {
            eta_in,
            ..mirror_tri()
        }
    }

    fn scene_with(
        tris: Vec<SpecularTriangle>,
        occluders: Vec<Triangle>,
    ) -> Scene {
        Scene::new(
            tris,
            occluders,
            vec![PointLight {
                position: Vec3::new(0.0, 0.0, 5.0),
                power: [1.0, 1.0, 1.0],
            }],
            Camera::basic(Vec3::new(0.0, 0.0, 5.0)),
        )
        .unwrap()
    }

    fn solve_class(
        scene: &Scene,
        seps: &Separators,
        class: ChainClass,
    ) -> (Vec<SpecularChain>, SolveReport) {
        solve_scene(scene, seps, &[class], &SolverConfig::default(), false)
    }

    #[test]
    fn flat_mirror_single_reflection_is_the_image_source_point() {
        let scene = scene_with(vec![mirror_tri()], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let (chains, report) = solve_class(&scene, &seps, ChainClass::R);
        assert_eq!(chains.len(), 1, "{}", report.summary());
        assert_eq!(report.admissible, 1);
        assert!(report.balanced(), "{}", report.summary());
        let x1 = chains[0].vertices[1];
        // image source: reflect (1,0,1) through z=0, intersect with the line
        // from (0,0,1) -> reflection point (0.5, 0, 0)
        assert!((x1 - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-7, "{x1:?}");
        assert!(chains[0].residual < 1e-9);
        assert!(chains[0].admissible());
    }

    #[test]
    fn flat_interface_matches_fermat_bisection() {
        let scene = scene_with(vec![interface_tri(1.5)], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, -1.0));
        let (chains, report) = solve_class(&scene, &seps, ChainClass::T);
        assert_eq!(chains.len(), 1, "{}", report.summary());

        // independent 1-D Fermat solve: minimize optical length
        // 1.0 * |(x,0,0) - x0| + 1.5 * |xe - (x,0,0)| by bisecting the
        // derivative sign change
        let f_prime = |x: f64| -> f64 {
            let d1 = (x * x + 1.0).sqrt();
            let d2 = ((1.0 - x) * (1.0 - x) + 1.0).sqrt();
            x / d1 - 1.5 * (1.0 - x) / d2
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        assert!(f_prime(lo) < 0.0 && f_prime(hi) > 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f_prime(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x_fermat = 0.5 * (lo + hi);
        let x_solver = chains[0].vertices[1].x;
        assert!(
            (x_solver - x_fermat).abs() < 1e-4,
            "solver {x_solver} vs fermat {x_fermat}"
        );
        assert!(chains[0].vertices[1].y.abs() < 1e-6);
    }

    #[test]
    fn perturbed_candidate_fails_the_constraint_check() {
        let scene = scene_with(vec![mirror_tri()], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let chain = resolve_chain(ChainClass::R, &seps, &[&scene.triangles[0]]).unwrap();
        let (chains, _) = solve_class(&scene, &seps, ChainClass::R);
        let exact = chains[0].bcs[0];

        let good = validate_path(&seps, &[0], &chain, exact, &scene, true);
        assert!(good.flags.constraint_ok && good.admissible());

        let off = BarycentricCoord::new(exact.u + 0.05, exact.v);
        let bad = validate_path(&seps, &[0], &chain, off, &scene, true);
        assert!(bad.flags.domain_ok);
        assert!(!bad.flags.constraint_ok);
        assert!(bad.residual > tol::THETA_CONSTRAINT);
        assert!(!bad.admissible());
    }

    #[test]
    fn occluder_blocks_a_segment() {
        // occluder square centered on the reflected segment's midpoint
        let m = Vec3::new(0.75, 0.0, 0.5);
        let occ = vec![
            Triangle {
                positions: [
                    m + Vec3::new(-0.3, -0.3, 0.0),
                    m + Vec3::new(0.3, -0.3, 0.0),
                    m + Vec3::new(0.0, 0.4, 0.0),
                ],
                albedo: [0.5; 3],
            },
        ];
        let scene = scene_with(vec![mirror_tri()], occ);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let chain = resolve_chain(ChainClass::R, &seps, &[&scene.triangles[0]]).unwrap();
        // the reflection point of the unoccluded fixture
        let bc = BarycentricCoord::new(0.5, 0.4);
        let res = validate_path(&seps, &[0], &chain, bc, &scene, true);
        assert!(res.flags.constraint_ok, "residual {}", res.residual);
        assert!(!res.flags.visible);
        assert!(!res.admissible());

        // and the full solve files it under occluded
        let (chains, report) = solve_class(&scene, &seps, ChainClass::R);
        assert!(chains.is_empty());
        assert_eq!(report.occluded, 1);
        assert!(report.balanced());
    }

    #[test]
    fn enumerate_ordered_tuples_with_repeats() {
        let t = mirror_tri();
        let shifted = |dz: f64| {
            let mut s = t.clone();
            for p in &mut s.positions {
                p.z += dz;
            }
            s
        };
        let scene = scene_with(vec![t.clone(), shifted(1.0), shifted(2.0)], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 5.0), Vec3::new(1.0, 0.0, 5.0));
        let singles = enumerate_tuples(&scene, &seps, ChainClass::R, false);
        assert_eq!(singles, vec![vec![0], vec![1], vec![2]]);
        let pairs = enumerate_tuples(&scene, &seps, ChainClass::RR, false);
        assert_eq!(pairs.len(), 9);
        let expect: Vec<Vec<usize>> = (0..3)
            .flat_map(|i| (0..3).map(move |j| vec![i, j]))
            .collect();
        assert_eq!(pairs, expect);
    }

    #[test]
    fn halfspace_cull_is_sound_on_the_mirror_fixture() {
        let scene = scene_with(vec![mirror_tri()], vec![]);
        // same side: kept, and culled solve matches unculled
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        assert_eq!(enumerate_tuples(&scene, &seps, ChainClass::R, true).len(), 1);
        let (a, _) = solve_scene(&scene, &seps, &[ChainClass::R], &SolverConfig::default(), false);
        let (b, _) = solve_scene(&scene, &seps, &[ChainClass::R], &SolverConfig::default(), true);
        assert_eq!(a.len(), b.len());
        assert_eq!(a[0].bcs[0], b[0].bcs[0]);

        // opposite sides: no reflection chain exists, cull drops the tuple
        let opp = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, -1.0));
        assert!(enumerate_tuples(&scene, &opp, ChainClass::R, true).is_empty());
        let (c, _) = solve_scene(&scene, &opp, &[ChainClass::R], &SolverConfig::default(), false);
        assert!(c.iter().all(|ch| !ch.admissible()));

        // transmission is the mirror image of the rule
        assert!(enumerate_tuples(&scene, &seps, ChainClass::T, true).is_empty());
        assert_eq!(enumerate_tuples(&scene, &opp, ChainClass::T, true).len(), 1);
    }

    #[test]
    fn geometric_term_flat_mirror_is_inverse_square_of_unfolded_length() {
        let scene = scene_with(vec![mirror_tri()], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let (chains, _) = solve_class(&scene, &seps, ChainClass::R);
        let g = geometric_term(&chains[0], &scene);
        let d1 = (chains[0].vertices[1] - seps.x0).norm();
        let d2 = (seps.x_k1 - chains[0].vertices[1]).norm();
        let expect = 1.0 / ((d1 + d2) * (d1 + d2));
        assert!(
            (g - expect).abs() < 0.01 * expect,
            "g = {g}, expected {expect}"
        );
    }

    #[test]
    fn geometric_term_index_matched_interface_is_inverse_square_distance() {
        let scene = scene_with(vec![interface_tri(1.0)], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, -1.0));
        let (chains, report) = solve_class(&scene, &seps, ChainClass::T);
        assert_eq!(chains.len(), 1, "{}", report.summary());
        let g = geometric_term(&chains[0], &scene);
        let d = (seps.x_k1 - seps.x0).norm();
        let expect = 1.0 / (d * d);
        assert!(
            (g - expect).abs() < 0.01 * expect,
            "g = {g}, expected {expect}"
        );
    }

    #[test]
    fn geometric_term_quarters_when_the_scene_doubles() {
        let double = |t: &SpecularTriangle| {
            let mut s = t.clone();
            for p in &mut s.positions {
                *p *= 2.0;
            }
            s
        };
        let scene1 = scene_with(vec![mirror_tri()], vec![]);
        let scene2 = scene_with(vec![double(&mirror_tri())], vec![]);
        let seps1 = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let seps2 = Separators::new(Vec3::new(0.0, 0.0, 2.0), Vec3::new(2.0, 0.0, 2.0));
        let (c1, _) = solve_class(&scene1, &seps1, ChainClass::R);
        let (c2, _) = solve_class(&scene2, &seps2, ChainClass::R);
        let g1 = geometric_term(&c1[0], &scene1);
        let g2 = geometric_term(&c2[0], &scene2);
        assert!((g2 - 0.25 * g1).abs() < 0.01 * g1.max(1e-30));
    }

    #[test]
    fn reports_are_deterministic_across_thread_counts() {
        // a scene busy enough to exercise several tuples and both root paths
        let t = mirror_tri();
        let tilted = {
            let mut s = t.clone();
            s.positions[0] += Vec3::new(0.0, 0.0, 0.4);
            s.positions[2] += Vec3::new(0.0, 0.0, -0.3);
            s
        };
        let high = {
            let mut s = t.clone();
            for p in &mut s.positions {
                p.z += 2.5;
            }
            s
        };
        let scene = scene_with(vec![t, tilted, high], vec![]);
        let seps = Separators::new(Vec3::new(0.2, 0.1, 1.0), Vec3::new(0.9, -0.2, 1.2));
        let classes = [ChainClass::R, ChainClass::RR];
        let cfg = SolverConfig::default();

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| solve_scene(&scene, &seps, &classes, &cfg, false))
        };
        let (c1, r1) = run(1);
        let (c4, r4) = run(4);
        assert_eq!(c1.len(), c4.len());
        for (a, b) in c1.iter().zip(&c4) {
            assert_eq!(a.tuple, b.tuple);
            // bit-identical, not approximately equal
            assert_eq!(a.bcs[0].u.to_bits(), b.bcs[0].u.to_bits());
            assert_eq!(a.bcs[0].v.to_bits(), b.bcs[0].v.to_bits());
            assert_eq!(a.residual.to_bits(), b.residual.to_bits());
        }
        assert_eq!(r1.resultant_roots, r4.resultant_roots);
        assert_eq!(r1.superfluous, r4.superfluous);
        assert_eq!(r1.domain_rejected, r4.domain_rejected);
        assert_eq!(r1.occluded, r4.occluded);
        assert_eq!(r1.admissible, r4.admissible);
        assert!(r1.balanced() && r4.balanced());
        assert!(r1.polish_runs <= 2 * r1.resultant_roots);
    }

    #[test]
    fn disabling_polish_leaves_one_bounce_mirror_positions_put() {
        let scene = scene_with(vec![mirror_tri()], vec![]);
        let seps = Separators::new(Vec3::new(0.3, -0.2, 0.8), Vec3::new(0.9, 0.4, 1.3));
        let mut on = SolverConfig::default();
        on.polish = PolishMode::On;
        let mut off = SolverConfig::default();
        off.polish = PolishMode::Off;
        let (ca, _) = solve_scene(&scene, &seps, &[ChainClass::R], &on, false);
        let (cb, _) = solve_scene(&scene, &seps, &[ChainClass::R], &off, false);
        assert_eq!(ca.len(), 1);
        assert_eq!(cb.len(), 1);
        let d = (ca[0].vertices[1] - cb[0].vertices[1]).norm();
        assert!(d < 1e-7, "polish moved a one-bounce root by {d:e}");
    }

    #[test]
    fn summary_text_reflects_the_counts() {
        let scene = scene_with(vec![mirror_tri()], vec![]);
        let seps = Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0));
        let (_, report) = solve_class(&scene, &seps, ChainClass::R);
        let s = report.summary();
        assert!(s.contains("tuples examined    1"));
        assert!(s.contains("  admissible       1"));
        assert!(s.contains("root accounting    balanced"));
    }
}
