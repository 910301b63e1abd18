//! Construction of the bivariate constraint systems.
//!
//! Every chain type is reduced to two polynomials `a(u, v)` and `b(u, v)` in
//! the barycentric coordinates of the *first* specular vertex. Interior
//! vertices never contribute equations: their scatter law is applied
//! constructively, propagating a polynomial-valued direction forward until the
//! last vertex, where two scalar constraints close the system —
//!
//! * `a`: the incoming direction, the segment to the far endpoint, and the
//!   shading normal are coplanar;
//! * `b`: the tangential law on that plane (a product form for mirrors, a
//!   squared-sine form for interfaces).
//!
//! Everything rational along the way (the plane-hit coordinates of the second
//! triangle, the rationalized square root inside the refracted direction) is
//! cleared by multiplying through by its denominator, so the final system is
//! honestly polynomial. The clearing denominators are kept on the side: their
//! zero sets can introduce artifact roots, which the solve pipeline culls by
//! evaluating them at every candidate.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::poly::{BivariatePolynomial, PolyVec3};
use crate::rootfind::newton_polish_2d;
use crate::scene::{NormalMode, Separators, SpecularTriangle, Vec3};
use crate::tol;

pub mod sqrt_fit;

pub use sqrt_fit::{SqrtApprox, SqrtFitError, SqrtPiece};

/// Barycentric point used to freeze per-tuple choices (surrogate piece, sqrt
/// branch sign, total-internal-reflection probe).
const DOMAIN_CENTROID: (f64, f64) = (1.0 / 3.0, 1.0 / 3.0);

/// Inset of the corner probes used to detect total internal reflection across
/// the triangle, pulled slightly off the corners to stay representative of
/// the interior.
const TIR_INSET: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolynomializeError {
    /// A constructed constraint vanished identically (relative to the scale
    /// of its inputs), even after basis fallbacks. The configuration has no
    /// well-posed system of this chain type.
    #[error("degenerate configuration while building the {stage}")]
    DegenerateConfiguration { stage: &'static str },
    /// The propagated direction is parallel to the next triangle's plane for
    /// every (u, v); the plane-hit mapping does not exist.
    #[error("propagated direction is parallel to the next triangle's plane over the whole domain")]
    RayParallel,
    /// The refraction radicand is non-positive at the domain probes: the
    /// transmitted branch does not exist over (most of) the triangle.
    #[error("total internal reflection across the probed domain; no transmitted branch")]
    TotalInternalReflection,
    #[error("chain with {expected} specular vertices built with {got} triangles")]
    ArityMismatch { expected: usize, got: usize },
}

/// What happens at one specular vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScatterKind {
    Reflect,
    Refract,
}

/// One resolved vertex event: the scatter kind plus the refractive indices on
/// the incoming (`eta_prev`) and outgoing (`eta_next`) side. Reflection keeps
/// both equal to the incoming index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainEvent {
    pub kind: ScatterKind,
    pub eta_prev: f64,
    pub eta_next: f64,
}

impl ChainEvent {
    /// Snell ratio eta_prev / eta_next (1 for reflection).
    pub fn eta_ratio(&self) -> f64 {
        self.eta_prev / self.eta_next
    }
}

/// The supported chain classes, named by their event sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChainClass {
    R,
    T,
    RR,
    RT,
    TR,
    TT,
}

impl ChainClass {
    pub fn all() -> [ChainClass; 6] {
        [
            ChainClass::R,
            ChainClass::T,
            ChainClass::RR,
            ChainClass::RT,
            ChainClass::TR,
            ChainClass::TT,
        ]
    }

    pub fn kinds(&self) -> &'static [ScatterKind] {
        use ScatterKind::{Reflect, Refract};
        match self {
            ChainClass::R => &[Reflect],
            ChainClass::T => &[Refract],
            ChainClass::RR => &[Reflect, Reflect],
            ChainClass::RT => &[Reflect, Refract],
            ChainClass::TR => &[Refract, Reflect],
            ChainClass::TT => &[Refract, Refract],
        }
    }

    /// Number of specular vertices (= triangles in the tuple).
    pub fn vertex_count(&self) -> usize {
        self.kinds().len()
    }

    pub fn has_refract(&self) -> bool {
        self.kinds().contains(&ScatterKind::Refract)
    }

    /// Two-bounce chains that refract are gated behind an opt-in flag: their
    /// systems run through the rationalized sqrt surrogate (TR, TT) or reach
    /// high degrees (RT, TR, TT), and carry looser accuracy expectations.
    pub fn is_experimental(&self) -> bool {
        self.vertex_count() == 2 && self.has_refract()
    }

    /// Declared upper bounds (total degree of a, total degree of b). The
    /// construction below stays within these; the builder asserts it.
    pub fn declared_degrees(&self) -> (usize, usize) {
        match self {
            ChainClass::R => (2, 4),
            ChainClass::T => (2, 6),
            ChainClass::RR => (10, 16),
            ChainClass::RT => (10, 24),
            ChainClass::TR => (16, 31),
            ChainClass::TT => (18, 48),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ChainClass::R => "R",
            ChainClass::T => "T",
            ChainClass::RR => "RR",
            ChainClass::RT => "RT",
            ChainClass::TR => "TR",
            ChainClass::TT => "TT",
        }
    }
}

impl fmt::Display for ChainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ChainClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "R" => Ok(ChainClass::R),
            "T" => Ok(ChainClass::T),
            "RR" => Ok(ChainClass::RR),
            "RT" => Ok(ChainClass::RT),
            "TR" => Ok(ChainClass::TR),
            "TT" => Ok(ChainClass::TT),
            other => Err(format!(
                "unknown chain class `{other}` (expected one of R, T, RR, RT, TR, TT)"
            )),
        }
    }
}

/// A chain class with its per-vertex media resolved against a concrete
/// triangle tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainType {
    pub class: ChainClass,
    pub events: Vec<ChainEvent>,
}

/// Resolves which medium each vertex is entered from, using a representative
/// polyline through the triangle centroids: start endpoint -> centroid 1
/// (-> centroid 2). A segment arriving against the geometric normal comes
/// from the `eta_out` side; arriving along it (ties included) comes from the
/// `eta_in` side. The choice is frozen per tuple so one tuple yields one
/// system.
pub fn resolve_chain(
    class: ChainClass,
    seps: &Separators,
    tris: &[&SpecularTriangle],
) -> Result<ChainType, PolynomializeError> {
    if tris.len() != class.vertex_count() {
        return Err(PolynomializeError::ArityMismatch {
            expected: class.vertex_count(),
            got: tris.len(),
        });
    }
    let mut events = Vec::with_capacity(tris.len());
    let mut from = seps.x0;
    for (tri, &kind) in tris.iter().zip(class.kinds()) {
        let w = tri.centroid() - from;
        let against = w.dot(&tri.geometric_normal()) < 0.0;
        let (eta_prev, eta_next) = if against {
            (tri.eta_out, tri.eta_in)
        } else {
            (tri.eta_in, tri.eta_out)
        };
        events.push(match kind {
            ScatterKind::Reflect => ChainEvent {
                kind,
                eta_prev,
                eta_next: eta_prev,
            },
            ScatterKind::Refract => ChainEvent {
                kind,
                eta_prev,
                eta_next,
            },
        });
        from = tri.centroid();
    }
    Ok(ChainType { class, events })
}

/// Largest coefficient magnitude over the three components.
fn vec_scale(v: &PolyVec3) -> f64 {
    v.x.max_abs_coeff()
        .max(v.y.max_abs_coeff())
        .max(v.z.max_abs_coeff())
}

/// Zeroes coefficients below the geometric noise floor (relative to the
/// largest) and shrinks the allocation. The constructions cancel their top
/// coefficients exactly in real arithmetic in several places; this keeps the
/// floating-point residue of those cancellations from inflating the nominal
/// degree, which would poison the resultant's matrix size.
fn cleaned(p: &BivariatePolynomial) -> BivariatePolynomial {
    let m = p.max_abs_coeff();
    if m == 0.0 {
        return p.trimmed();
    }
    let thr = tol::EPS_GEOM_COEFF * m;
    let mut out = p.clone();
    let d = out.deg();
    for i in 0..=d {
        for j in 0..=(d - i) {
            if out.coeff(i, j).abs() < thr {
                out.set(i, j, 0.0);
            }
        }
    }
    out.trimmed()
}

/// Coplanarity constraint `(d_prev x (x_to - x_from)) . n`. Vanishes exactly
/// where the incoming direction, the outgoing segment and the normal lie in
/// one plane. All arguments are polynomial; rational quantities must be
/// passed as their numerators (the denominator only scales the constraint).
///
/// `x_from` may be any anchor on the incoming line — exchanging it for
/// another point of that line adds a term `d_prev x (multiple of d_prev)`,
/// which is identically zero — so callers pick the anchor of lowest degree.
pub fn coplanarity_poly(
    d_prev: &PolyVec3,
    x_from: &PolyVec3,
    x_to: &PolyVec3,
    n: &PolyVec3,
) -> BivariatePolynomial {
    d_prev.cross(&x_to.sub(x_from)).dot(n)
}

/// Mirror tangential law `(d_prev.n)(d_next.t) + (d_prev.t)(d_next.n)` with
/// `t` perpendicular to `n`. Zero for mirror-reflected pairs, nonzero for the
/// straight-through continuation, and invariant (as a zero set) under
/// rescaling any argument.
pub fn product_form_poly(
    d_prev: &PolyVec3,
    d_next: &PolyVec3,
    n: &PolyVec3,
    t: &PolyVec3,
) -> BivariatePolynomial {
    let pn = d_prev.dot(n);
    let pt = d_prev.dot(t);
    let nn = d_next.dot(n);
    let nt = d_next.dot(t);
    pn.mul(&nt).add(&pt.mul(&nn))
}

/// Squared-sine interface law
/// `ep^2 ((d_prev x n).e)^2 |d_next|^2 - en^2 ((d_next x n).e)^2 |d_prev|^2`.
///
/// On the coplanarity zero set both cross products are parallel (each is
/// perpendicular to the common plane), so projecting them onto one fixed
/// basis vector `e` only multiplies both terms by the same squared cosine and
/// the form vanishes exactly on Snell-compatible pairs. With equal indices it
/// also vanishes on mirror pairs — the reflection limit — which is why
/// mirrors use the product form instead.
pub fn square_form_poly(
    d_prev: &PolyVec3,
    d_next: &PolyVec3,
    n: &PolyVec3,
    eta_prev: f64,
    eta_next: f64,
    e: Vec3,
) -> BivariatePolynomial {
    let e = PolyVec3::constant(e);
    let sp = d_prev.cross(n).dot(&e);
    let sn = d_next.cross(n).dot(&e);
    let lead = sp.mul(&sp).mul(&d_next.norm_sq()).scale(eta_prev * eta_prev);
    let trail = sn.mul(&sn).mul(&d_prev.norm_sq()).scale(eta_next * eta_next);
    lead.sub(&trail)
}

/// Mirror direction with un-normalized inputs: `d |n|^2 - 2 (d.n) n`.
/// Pointwise parallel to the unit-vector mirror law (scaled by `|n|^2 > 0`),
/// so substituting it for the reflected direction preserves root sets.
pub fn reflect_dir(d: &PolyVec3, n: &PolyVec3) -> PolyVec3 {
    d.scale_poly(&n.norm_sq())
        .sub(&n.scale_poly(&d.dot(n).scale(2.0)))
}

/// Rationalized transmitted direction.
#[derive(Clone, Debug)]
pub struct RefractDir {
    /// Direction numerator; pointwise parallel to the transmitted direction
    /// wherever `den > 0`.
    pub num: PolyVec3,
    /// Clearing denominator `d0 B + d1 beta` from the sqrt surrogate piece.
    pub den: BivariatePolynomial,
    /// Surrogate piece the radicand was anchored to.
    pub piece: usize,
    /// Radicand `(1 - r^2) |d|^2 |n|^2 + r^2 (d.n)^2` (`r` the Snell ratio).
    pub beta: BivariatePolynomial,
    /// `|d|^2 |n|^2` at the domain centroid, the constant reference placing
    /// `beta / beta_scale` inside the surrogate's certified `[0, 1]` window.
    pub beta_scale: f64,
    /// Frozen sign of the sqrt branch: the sign of `d.n` at the centroid.
    pub sqrt_sign: f64,
}

/// Transmitted direction as a rational polynomial vector.
///
/// The exact transmitted direction scaled by `|d| |n|^2` is
/// `r (d |n|^2 - (d.n) n) + sign(d.n) sqrt(beta) n` with
/// `beta = (1 - r^2) |d|^2 |n|^2 + r^2 (d.n)^2` — this form of the radicand
/// never subtracts like terms, so it stays accurate near total internal
/// reflection. The square root is replaced by the certified piecewise-Möbius
/// surrogate: with `B = beta_scale`,
/// `sqrt(beta) ~ sqrt(B) (c0 B + c1 beta) / (d0 B + d1 beta)`,
/// which is exactly the surrogate of `sqrt(s)` evaluated at `s = beta / B`.
/// Multiplying through by the denominator gives `num` and `den`.
///
/// Errors with `TotalInternalReflection` if the radicand is non-positive at
/// the centroid or at any inset-corner probe.
pub fn refract_dir(
    d: &PolyVec3,
    n: &PolyVec3,
    eta_ratio: f64,
    fit: &SqrtApprox,
) -> Result<RefractDir, PolynomializeError> {
    let r = eta_ratio;
    let n2 = n.norm_sq();
    let d2 = d.norm_sq();
    let dn = d.dot(n);
    let beta = n2
        .mul(&d2)
        .scale(1.0 - r * r)
        .add(&dn.mul(&dn).scale(r * r));

    let (cu, cv) = DOMAIN_CENTROID;
    let probes = [
        (cu, cv),
        (TIR_INSET, TIR_INSET),
        (1.0 - 2.0 * TIR_INSET, TIR_INSET),
        (TIR_INSET, 1.0 - 2.0 * TIR_INSET),
    ];
    for &(pu, pv) in &probes {
        if beta.eval(pu, pv) <= 0.0 {
            return Err(PolynomializeError::TotalInternalReflection);
        }
    }

    let b_scale = n2.eval(cu, cv) * d2.eval(cu, cv);
    if !(b_scale > 0.0) {
        return Err(PolynomializeError::DegenerateConfiguration {
            stage: "refraction radicand scale",
        });
    }
    let piece_idx = fit.piece_for(beta.eval(cu, cv) / b_scale);
    let piece = &fit.pieces[piece_idx];

    let den = beta
        .scale(piece.d1)
        .add(&BivariatePolynomial::constant(piece.d0 * b_scale));
    let sqrt_num = beta
        .scale(piece.c1)
        .add(&BivariatePolynomial::constant(piece.c0 * b_scale))
        .scale(b_scale.sqrt());
    let sqrt_sign = if dn.eval(cu, cv) >= 0.0 { 1.0 } else { -1.0 };

    let tangential = d.scale_poly(&n2).sub(&n.scale_poly(&dn));
    let num = tangential
        .scale(r)
        .scale_poly(&den)
        .add(&n.scale_poly(&sqrt_num.scale(sqrt_sign)));

    Ok(RefractDir {
        num,
        den,
        piece: piece_idx,
        beta,
        beta_scale: b_scale,
        sqrt_sign,
    })
}

/// Denominator-cleared barycentric coordinates of the point where the
/// polynomial ray `origin + t dir` meets the plane of `tri`.
#[derive(Clone, Debug)]
pub struct BarycentricMap {
    /// Clearing denominator `(dir x e2) . e1`; zero where the ray runs
    /// parallel to the plane.
    pub kappa: BivariatePolynomial,
    /// `u` numerator `(origin - p0) . (dir x e2)`.
    pub u_num: BivariatePolynomial,
    /// `v` numerator `dir . ((origin - p0) x e1)`.
    pub v_num: BivariatePolynomial,
    /// Hit position scaled by kappa: `kappa p0 + u_num e1 + v_num e2`.
    pub position_num: PolyVec3,
    /// Shading normal at the hit, scaled by kappa — except in face mode,
    /// where it is the constant geometric normal (no scaling needed).
    pub normal_num: PolyVec3,
    pub normal_is_constant: bool,
}

/// Clears the ray/triangle intersection (Cramer's rule on
/// `p0 + u e1 + v e2 = origin + t dir`) into polynomial numerators over the
/// shared denominator `kappa`. Errors with `RayParallel` when `kappa`
/// vanishes identically.
pub fn map_next_barycentric(
    dir: &PolyVec3,
    origin: &PolyVec3,
    tri: &SpecularTriangle,
) -> Result<BarycentricMap, PolynomializeError> {
    let e1 = tri.edge1();
    let e2 = tri.edge2();
    let p0 = tri.positions[0];

    let pvec = dir.cross(&PolyVec3::constant(e2));
    let kappa = pvec.dot(&PolyVec3::constant(e1));
    let scale = vec_scale(dir) * e1.norm() * e2.norm();
    if kappa.max_abs_coeff() < tol::DEGENERATE_POLY * scale {
        return Err(PolynomializeError::RayParallel);
    }

    let tvec = origin.sub(&PolyVec3::constant(p0));
    let u_num = tvec.dot(&pvec);
    let v_num = dir.dot(&tvec.cross(&PolyVec3::constant(e1)));
    let position_num = PolyVec3::weighted(p0, &kappa, e1, &u_num, e2, &v_num);

    let (normal_num, normal_is_constant) = match tri.normal_mode {
        NormalMode::Face => (PolyVec3::constant(tri.geometric_normal()), true),
        NormalMode::Interpolated => {
            let [na, nb, nc] = tri.shading_normals;
            (
                PolyVec3::weighted(na, &kappa, nb - na, &u_num, nc - na, &v_num),
                false,
            )
        }
    };

    Ok(BarycentricMap {
        kappa,
        u_num,
        v_num,
        position_num,
        normal_num,
        normal_is_constant,
    })
}

/// A finished bivariate system for one (tuple, chain type) pair.
///
/// `a` and `b` are normalized to unit largest coefficient; the original
/// scales are kept so residuals can be reported in either convention.
#[derive(Clone, Debug)]
pub struct SpecularSystem {
    pub a: BivariatePolynomial,
    pub b: BivariatePolynomial,
    pub chain: ChainType,
    /// Declared total-degree bounds (deg a, deg b) for the chain class; the
    /// built system never exceeds them.
    pub expected_degrees: (usize, usize),
    pub cond_scale_a: f64,
    pub cond_scale_b: f64,
    /// Product of all clearing denominators (plane-hit scalar, surrogate
    /// denominator), normalized to unit largest coefficient. System roots on
    /// its zero set are clearing artifacts, not light paths; `None` when
    /// nothing was cleared (one-bounce chains).
    pub kappa: Option<BivariatePolynomial>,
    /// Surrogate piece index when the first vertex refracts.
    pub sqrt_piece: Option<usize>,
    /// Non-fatal construction notes (tangent-basis fallbacks and the like).
    pub fallbacks: Vec<String>,
}

impl SpecularSystem {
    /// Actual total degrees (deg a, deg b) of the built system.
    pub fn degrees(&self) -> (usize, usize) {
        (self.a.actual_degree(), self.b.actual_degree())
    }

    /// Larger of |a| and |b| at (u, v), in the conditioned (unit max
    /// coefficient) scale.
    pub fn residual(&self, u: f64, v: f64) -> f64 {
        self.a.eval(u, v).abs().max(self.b.eval(u, v).abs())
    }

    /// Damped Newton refinement of a candidate root against this system.
    pub fn polish(&self, u: f64, v: f64, iters: usize) -> (f64, f64, bool) {
        newton_polish_2d(&self.a, &self.b, u, v, iters)
    }

    /// Relative magnitude of the clearing-denominator product at (u, v);
    /// `None` when nothing was cleared. Candidates with a tiny value sit on
    /// a clearing pole and are culled as artifacts.
    pub fn kappa_at(&self, u: f64, v: f64) -> Option<f64> {
        self.kappa.as_ref().map(|k| k.eval(u, v).abs())
    }
}

/// Shading normal as a polynomial vector.
fn normal_poly(tri: &SpecularTriangle) -> PolyVec3 {
    match tri.normal_mode {
        NormalMode::Face => PolyVec3::constant(tri.geometric_normal()),
        NormalMode::Interpolated => PolyVec3::interpolate(
            tri.shading_normals[0],
            tri.shading_normals[1],
            tri.shading_normals[2],
        ),
    }
}

/// Unit normal of the plane spanned by the nominal incoming and outgoing
/// directions at a vertex (probed at centroids); `None` when the directions
/// are nearly colinear and the plane is unresolved.
fn plane_probe(d_in: Vec3, d_out: Vec3) -> Option<Vec3> {
    let c = d_in.cross(&d_out);
    let s = d_in.norm() * d_out.norm();
    if c.norm() <= 1e-8 * s.max(f64::MIN_POSITIVE) {
        None
    } else {
        Some(c / c.norm())
    }
}

/// The tangential constraint is built on a fixed basis vector. The basis
/// vector matters: one that ends up perpendicular to the plane of incidence
/// projects out the out-of-plane components, which coplanarity already
/// constrains — the pair then shares a whole zero curve instead of meeting
/// in points. The probe (the centroid estimate of the incidence-plane
/// normal) is immune to that by construction and is tried first; the
/// coordinate axes are fallbacks. Every candidate must clear the degeneracy
/// floor, and when the coplanarity constraint carries no dependence on one
/// barycentric coordinate (axis-aligned configurations), the tangential
/// constraint must supply it or the variable drops out of the system.
fn tangential_constraint(
    build: impl Fn(Vec3) -> BivariatePolynomial,
    ref_scale: f64,
    a: &BivariatePolynomial,
    probe: Option<Vec3>,
    stage: &'static str,
    fallbacks: &mut Vec<String>,
) -> Result<BivariatePolynomial, PolynomializeError> {
    let need_u = a.degree_u() == 0;
    let need_v = a.degree_v() == 0;
    let mut axes: Vec<(Vec3, &'static str)> = Vec::with_capacity(4);
    if let Some(e) = probe {
        axes.push((e, "incidence-plane probe"));
    }
    axes.push((Vec3::new(1.0, 0.0, 0.0), "x axis"));
    axes.push((Vec3::new(0.0, 1.0, 0.0), "y axis"));
    axes.push((Vec3::new(0.0, 0.0, 1.0), "z axis"));
    let mut last_resort: Option<(&'static str, BivariatePolynomial)> = None;
    for (idx, &(axis, name)) in axes.iter().enumerate() {
        let b = cleaned(&build(axis));
        if b.max_abs_coeff() < tol::DEGENERATE_POLY * ref_scale {
            continue;
        }
        if (need_u && b.degree_u() == 0) || (need_v && b.degree_v() == 0) {
            if last_resort.is_none() {
                last_resort = Some((name, b));
            }
            continue;
        }
        if idx > 0 {
            fallbacks.push(format!("{stage} built on the fallback {name}"));
        }
        return Ok(b);
    }
    // Nonzero on some basis vector but never completing the system: hand the
    // best attempt to the caller anyway — elimination will classify the
    // tuple as degenerate without crashing.
    if let Some((name, b)) = last_resort {
        fallbacks.push(format!(
            "{stage} built on the {name} without completing the variable coverage"
        ));
        return Ok(b);
    }
    Err(PolynomializeError::DegenerateConfiguration { stage })
}

/// Builds the conditioned system for a resolved chain over a triangle tuple.
///
/// One-bounce chains place both constraints directly at the vertex.
/// Two-bounce chains apply the first vertex's scatter law constructively
/// (mirror direction, or the rationalized transmitted direction), clear the
/// plane hit on the second triangle, and place both constraints there.
pub fn build_system(
    seps: &Separators,
    tris: &[&SpecularTriangle],
    chain: &ChainType,
) -> Result<SpecularSystem, PolynomializeError> {
    build_system_with_fit(seps, tris, chain, SqrtApprox::global())
}

/// [`build_system`] with an explicit sqrt surrogate table.
///
/// The default table is global and centroid-anchored. Passing a custom table
/// lets a caller rebuild the system with a surrogate re-centered on an
/// already-located candidate root, which shrinks the surrogate error from the
/// global fit bound down to the fit quality of the replacement table.
pub fn build_system_with_fit(
    seps: &Separators,
    tris: &[&SpecularTriangle],
    chain: &ChainType,
    fit: &SqrtApprox,
) -> Result<SpecularSystem, PolynomializeError> {
    if tris.len() != chain.events.len() {
        return Err(PolynomializeError::ArityMismatch {
            expected: chain.events.len(),
            got: tris.len(),
        });
    }
    match chain.events.len() {
        1 => one_bounce(seps, tris[0], chain),
        2 => two_bounce(seps, tris[0], tris[1], chain, fit),
        other => Err(PolynomializeError::ArityMismatch {
            expected: 2,
            got: other,
        }),
    }
}

fn finish_system(
    a_raw: BivariatePolynomial,
    b_raw: BivariatePolynomial,
    chain: &ChainType,
    kappa: Option<BivariatePolynomial>,
    sqrt_piece: Option<usize>,
    fallbacks: Vec<String>,
) -> Result<SpecularSystem, PolynomializeError> {
    let (a, cond_scale_a) = a_raw
        .normalize_max()
        .map_err(|_| PolynomializeError::DegenerateConfiguration {
            stage: "coplanarity constraint",
        })?;
    let (b, cond_scale_b) = b_raw
        .normalize_max()
        .map_err(|_| PolynomializeError::DegenerateConfiguration {
            stage: "tangential constraint",
        })?;
    let kappa = match kappa {
        Some(k) => Some(
            k.normalize_max()
                .map(|(p, _)| p)
                .map_err(|_| PolynomializeError::RayParallel)?,
        ),
        None => None,
    };
    let expected = chain.class.declared_degrees();
    let got = (a.actual_degree(), b.actual_degree());
    assert!(
        got.0 <= expected.0 && got.1 <= expected.1,
        "{} system degrees {:?} exceed the declared bounds {:?}",
        chain.class,
        got,
        expected
    );
    Ok(SpecularSystem {
        a,
        b,
        chain: chain.clone(),
        expected_degrees: expected,
        cond_scale_a,
        cond_scale_b,
        kappa,
        sqrt_piece,
        fallbacks,
    })
}

fn one_bounce(
    seps: &Separators,
    tri: &SpecularTriangle,
    chain: &ChainType,
) -> Result<SpecularSystem, PolynomializeError> {
    let event = chain.events[0];
    let x1 = PolyVec3::interpolate(tri.positions[0], tri.positions[1], tri.positions[2]);
    let n1 = normal_poly(tri);
    let x0 = PolyVec3::constant(seps.x0);
    let xe = PolyVec3::constant(seps.x_k1);
    let d_in = x1.sub(&x0);
    let d_out = xe.sub(&x1);

    // Anchoring the outgoing segment at the fixed start endpoint keeps the
    // quadratic self-cancellation out of the arithmetic entirely.
    let a_raw = cleaned(&coplanarity_poly(&d_in, &x0, &xe, &n1));
    let geom = vec_scale(&d_in) * (seps.x_k1 - seps.x0).norm().max(1.0) * vec_scale(&n1);
    if a_raw.max_abs_coeff() < tol::DEGENERATE_POLY * geom {
        return Err(PolynomializeError::DegenerateConfiguration {
            stage: "coplanarity constraint",
        });
    }

    let mut fallbacks = Vec::new();
    let dir_scale = vec_scale(&d_in) * vec_scale(&d_out);
    let c = tri.centroid();
    let probe = plane_probe(c - seps.x0, seps.x_k1 - c);
    let b_raw = match event.kind {
        ScatterKind::Reflect => tangential_constraint(
            |axis| {
                let t = n1.cross(&PolyVec3::constant(axis));
                product_form_poly(&d_in, &d_out, &n1, &t)
            },
            dir_scale * vec_scale(&n1) * vec_scale(&n1),
            &a_raw,
            probe,
            "tangential mirror constraint",
            &mut fallbacks,
        )?,
        ScatterKind::Refract => tangential_constraint(
            |axis| square_form_poly(&d_in, &d_out, &n1, event.eta_prev, event.eta_next, axis),
            {
                let e = event.eta_prev.max(event.eta_next);
                let s = dir_scale * vec_scale(&n1);
                e * e * s * s
            },
            &a_raw,
            probe,
            "interface sine constraint",
            &mut fallbacks,
        )?,
    };

    finish_system(a_raw, b_raw, chain, None, None, fallbacks)
}

fn two_bounce(
    seps: &Separators,
    tri1: &SpecularTriangle,
    tri2: &SpecularTriangle,
    chain: &ChainType,
    fit: &SqrtApprox,
) -> Result<SpecularSystem, PolynomializeError> {
    let first = chain.events[0];
    let second = chain.events[1];

    let x1 = PolyVec3::interpolate(tri1.positions[0], tri1.positions[1], tri1.positions[2]);
    let n1 = normal_poly(tri1);
    let d0 = x1.sub(&PolyVec3::constant(seps.x0));

    let (d1, refr_den, sqrt_piece) = match first.kind {
        ScatterKind::Reflect => (reflect_dir(&d0, &n1), None, None),
        ScatterKind::Refract => {
            let rd = refract_dir(&d0, &n1, first.eta_ratio(), fit)?;
            (rd.num, Some(rd.den), Some(rd.piece))
        }
    };

    let map = map_next_barycentric(&d1, &x1, tri2)?;
    let n2 = &map.normal_num;
    let xe = PolyVec3::constant(seps.x_k1);

    // Reduced coplanarity: the cleared hit position satisfies
    // position_num - kappa * x1 = (multiple of d1), so anchoring the
    // outgoing segment at x1 divides the common kappa factor out of the
    // constraint instead of carrying its artifact roots along.
    let a_raw = cleaned(&coplanarity_poly(&d1, &x1, &xe, n2));
    let geom = vec_scale(&d1) * (vec_scale(&xe.sub(&x1)).max(1.0)) * vec_scale(n2);
    if a_raw.max_abs_coeff() < tol::DEGENERATE_POLY * geom {
        return Err(PolynomializeError::DegenerateConfiguration {
            stage: "coplanarity constraint",
        });
    }

    // Cleared outgoing segment kappa * x_end - position_num.
    let d2 = xe.scale_poly(&map.kappa).sub(&map.position_num);

    let mut fallbacks = Vec::new();
    let dir_scale = vec_scale(&d1) * vec_scale(&d2);
    let c2 = tri2.centroid();
    let probe = plane_probe(c2 - tri1.centroid(), seps.x_k1 - c2);
    let b_raw = match second.kind {
        ScatterKind::Reflect => tangential_constraint(
            |axis| {
                let t = n2.cross(&PolyVec3::constant(axis));
                product_form_poly(&d1, &d2, n2, &t)
            },
            dir_scale * vec_scale(n2) * vec_scale(n2),
            &a_raw,
            probe,
            "tangential mirror constraint",
            &mut fallbacks,
        )?,
        ScatterKind::Refract => tangential_constraint(
            |axis| square_form_poly(&d1, &d2, n2, second.eta_prev, second.eta_next, axis),
            {
                let e = second.eta_prev.max(second.eta_next);
                let s = dir_scale * vec_scale(n2);
                e * e * s * s
            },
            &a_raw,
            probe,
            "interface sine constraint",
            &mut fallbacks,
        )?,
    };

    let kappa = match refr_den {
        Some(den) => map.kappa.mul(&den),
        None => map.kappa.clone(),
    };

    finish_system(a_raw, b_raw, chain, Some(kappa), sqrt_piece, fallbacks)
}
