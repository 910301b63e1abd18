//! Scene geometry: specular triangles with shading normals and an IOR pair,
//! plain diffuse/occluder triangles, point lights, a pinhole camera.
//! Barycentric interpolation, Moller-Trumbore ray casting, and segment
//! visibility live here.
//!
//! All tolerances derive from the scene scale (bounding-box diagonal) so
//! fixtures are unit-independent: eps_geom = 1e-12*scale^2 gates degenerate
//! triangles, eps_ray = 1e-6*scale is the self-intersection offset.

mod parse;

pub use parse::load_scene;

pub type Vec3 = nalgebra::Vector3<f64>;

use crate::tol;

/// How the shading normal field is evaluated over a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalMode {
    /// Barycentric interpolation of the three vertex normals (un-normalized).
    Interpolated,
    /// Constant geometric normal; vertex normals are ignored.
    Face,
}

/// Specular (mirror or dielectric) triangle.
///
/// `eta_out` is the refractive index of the medium the geometric normal
/// points into; `eta_in` is the medium behind the triangle. A mirror uses
/// `eta_out == eta_in` (the values never enter a reflection system).
#[derive(Clone, Debug)]
pub struct SpecularTriangle {
    pub positions: [Vec3; 3],
    pub shading_normals: [Vec3; 3],
    pub normal_mode: NormalMode,
    pub eta_out: f64,
    pub eta_in: f64,
}

impl SpecularTriangle {
    pub fn edge1(&self) -> Vec3 {
        self.positions[1] - self.positions[0]
    }

    pub fn edge2(&self) -> Vec3 {
        self.positions[2] - self.positions[0]
    }

    /// Un-normalized geometric normal e1 x e2.
    pub fn geometric_normal(&self) -> Vec3 {
        self.edge1().cross(&self.edge2())
    }

    pub fn centroid(&self) -> Vec3 {
        (self.positions[0] + self.positions[1] + self.positions[2]) / 3.0
    }

    /// Position interpolation P * (1-u-v, u, v); extrapolation allowed.
    pub fn interpolate_position(&self, bc: BarycentricCoord) -> Vec3 {
        let w = 1.0 - bc.u - bc.v;
        self.positions[0] * w + self.positions[1] * bc.u + self.positions[2] * bc.v
    }

    /// Shading normal at bc (un-normalized). Face mode returns the constant
    /// geometric normal.
    pub fn interpolate_normal(&self, bc: BarycentricCoord) -> Vec3 {
        match self.normal_mode {
            NormalMode::Face => self.geometric_normal(),
            NormalMode::Interpolated => {
                let w = 1.0 - bc.u - bc.v;
                self.shading_normals[0] * w
                    + self.shading_normals[1] * bc.u
                    + self.shading_normals[2] * bc.v
            }
        }
    }
}

/// Plain triangle: occluder and diffuse receiver in one. The albedo is only
/// used when the triangle acts as a receiver during rendering.
#[derive(Clone, Debug)]
pub struct Triangle {
    pub positions: [Vec3; 3],
    pub albedo: [f64; 3],
}

impl Triangle {
    pub fn geometric_normal(&self) -> Vec3 {
        (self.positions[1] - self.positions[0]).cross(&(self.positions[2] - self.positions[0]))
    }
}

#[derive(Clone, Debug)]
pub struct PointLight {
    pub position: Vec3,
    pub power: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_y_deg: f64,
    pub resolution: (u32, u32),
}

impl Camera {
    /// Minimal camera for solver-only scenes where no image is rendered.
    pub fn basic(position: Vec3) -> Self {
        Camera {
            position,
            look_at: Vec3::zeros(),
            up: Vec3::new(0.0, 1.0, 0.0),
            fov_y_deg: 45.0,
            resolution: (64, 64),
        }
    }

    /// Primary ray through the center of pixel (px, py) at the given
    /// resolution. Right-handed basis; pixel (0,0) is top-left.
    pub fn primary_ray(&self, px: u32, py: u32, res: (u32, u32)) -> (Vec3, Vec3) {
        let fwd = (self.look_at - self.position).normalize();
        let right = fwd.cross(&self.up).normalize();
        let up = right.cross(&fwd);
        let (w, h) = (res.0 as f64, res.1 as f64);
        let tan_half = (self.fov_y_deg.to_radians() / 2.0).tan();
        let sx = (2.0 * (px as f64 + 0.5) / w - 1.0) * tan_half * (w / h);
        let sy = (1.0 - 2.0 * (py as f64 + 0.5) / h) * tan_half;
        let dir = (fwd + right * sx + up * sy).normalize();
        (self.position, dir)
    }
}

/// The two fixed chain endpoints: x0 on the camera side, x_k1 on the light
/// side. The implicit barycentric coordinates of the endpoints never
/// materialize; these points stand in for them.
#[derive(Clone, Copy, Debug)]
pub struct Separators {
    pub x0: Vec3,
    pub x_k1: Vec3,
}

impl Separators {
    pub fn new(x0: Vec3, x_k1: Vec3) -> Self {
        assert!(x0 != x_k1, "separator endpoints coincide");
        Separators { x0, x_k1 }
    }
}

/// Barycentric coordinate pair; the third weight is 1-u-v. Values outside the
/// simplex are legal during solving — admissibility is checked at validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarycentricCoord {
    pub u: f64,
    pub v: f64,
}

impl BarycentricCoord {
    pub fn new(u: f64, v: f64) -> Self {
        BarycentricCoord { u, v }
    }

    /// Inside-simplex predicate with slack on each face.
    pub fn inside(&self, slack: f64) -> bool {
        self.u >= -slack && self.v >= -slack && self.u + self.v <= 1.0 + slack
    }
}

/// Identifies a triangle for visibility ignore-sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriId {
    Specular(usize),
    Occluder(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub bc: BarycentricCoord,
}

/// Moller-Trumbore ray/triangle intersection. Hits with t <= t_min are
/// discarded (self-intersection guard); both faces hit.
pub fn intersect_ray(origin: Vec3, dir: Vec3, positions: &[Vec3; 3], t_min: f64) -> Option<RayHit> {
    let e1 = positions[1] - positions[0];
    let e2 = positions[2] - positions[0];
    let pvec = dir.cross(&e2);
    let det = pvec.dot(&e1);
    if det == 0.0 {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - positions[0];
    let u = pvec.dot(&tvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = qvec.dot(&dir) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = qvec.dot(&e2) * inv_det;
    if t <= t_min {
        return None;
    }
    Some(RayHit { t, bc: BarycentricCoord::new(u, v) })
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub triangles: Vec<SpecularTriangle>,
    pub occluders: Vec<Triangle>,
    pub lights: Vec<PointLight>,
    pub camera: Camera,
    scale: f64,
}

impl Scene {
    /// Validates geometry against the scale-derived epsilons. A triangle's
    /// index is reported on error; the file loader maps it back to a line.
    pub fn new(
        triangles: Vec<SpecularTriangle>,
        occluders: Vec<Triangle>,
        lights: Vec<PointLight>,
        camera: Camera,
    ) -> Result<Self, SceneError> {
        if camera.resolution.0 == 0 || camera.resolution.1 == 0 {
            return Err(SceneError::ZeroResolution);
        }
        let scale = compute_scale(&triangles, &occluders, &lights, &camera);
        let eps_geom = tol::EPS_GEOM_COEFF * scale * scale;
        for (i, t) in triangles.iter().enumerate() {
            let gn = t.geometric_normal();
            if gn.norm() <= eps_geom {
                return Err(SceneError::DegenerateTriangle { index: i });
            }
            if t.eta_in <= 0.0 || t.eta_out <= 0.0 {
                return Err(SceneError::BadIor { index: i });
            }
            if t.normal_mode == NormalMode::Interpolated {
                for n in &t.shading_normals {
                    if n.dot(&gn) <= 0.0 {
                        return Err(SceneError::InconsistentNormal { index: i });
                    }
                }
            }
        }
        for (i, t) in occluders.iter().enumerate() {
            if t.geometric_normal().norm() <= eps_geom {
                return Err(SceneError::DegenerateOccluder { index: i });
            }
        }
        Ok(Scene { triangles, occluders, lights, camera, scale })
    }

    /// Bounding-box diagonal over all geometry, lights, and the camera.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eps_ray(&self) -> f64 {
        tol::EPS_RAY_COEFF * self.scale
    }

    pub fn eps_geom(&self) -> f64 {
        tol::EPS_GEOM_COEFF * self.scale * self.scale
    }

    fn tri_positions(&self, id: TriId) -> &[Vec3; 3] {
        match id {
            TriId::Specular(i) => &self.triangles[i].positions,
            TriId::Occluder(i) => &self.occluders[i].positions,
        }
    }

    /// Nearest hit over all triangles (specular and occluder) not in `ignore`.
    pub fn intersect(
        &self,
        origin: Vec3,
        dir: Vec3,
        ignore: &[TriId],
        t_max: f64,
    ) -> Option<(TriId, RayHit)> {
        let mut best: Option<(TriId, RayHit)> = None;
        let eps = self.eps_ray();
        let mut consider = |id: TriId, positions: &[Vec3; 3]| {
            if ignore.contains(&id) {
                return;
            }
            if let Some(hit) = intersect_ray(origin, dir, positions, eps) {
                if hit.t < t_max && best.map_or(true, |(_, b)| hit.t < b.t) {
                    best = Some((id, hit));
                }
            }
        };
        for (i, t) in self.triangles.iter().enumerate() {
            consider(TriId::Specular(i), &t.positions);
        }
        for (i, t) in self.occluders.iter().enumerate() {
            consider(TriId::Occluder(i), &t.positions);
        }
        best
    }

    /// True iff no non-ignored triangle blocks the open segment (a, b).
    /// Both endpoints are pulled in by eps_ray so points lying exactly on a
    /// surface do not occlude themselves.
    pub fn visible(&self, a: Vec3, b: Vec3, ignore: &[TriId]) -> bool {
        let seg = b - a;
        let len = seg.norm();
        let eps = self.eps_ray();
        if len <= 2.0 * eps {
            return true;
        }
        let dir = seg / len;
        let origin = a + dir * eps;
        let t_max = len - 2.0 * eps;
        self.intersect(origin, dir, ignore, t_max).is_none()
    }
}

fn compute_scale(
    triangles: &[SpecularTriangle],
    occluders: &[Triangle],
    lights: &[PointLight],
    camera: &Camera,
) -> f64 {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    let mut grow = |p: &Vec3| {
        lo = lo.inf(p);
        hi = hi.sup(p);
    };
    for t in triangles {
        t.positions.iter().for_each(&mut grow);
    }
    for t in occluders {
        t.positions.iter().for_each(&mut grow);
    }
    for l in lights {
        grow(&l.position);
    }
    grow(&camera.position);
    let diag = (hi - lo).norm();
    if diag.is_finite() && diag > 0.0 {
        diag
    } else {
        1.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error reading scene: {0}")]
    Io(#[from] std::io::Error),
    #[error("camera block missing")]
    MissingCamera,
    #[error("camera resolution must be positive")]
    ZeroResolution,
    #[error("specular triangle {index} is degenerate (area below eps_geom)")]
    DegenerateTriangle { index: usize },
    #[error("occluder triangle {index} is degenerate (area below eps_geom)")]
    DegenerateOccluder { index: usize },
    #[error("specular triangle {index} has a non-positive refractive index")]
    BadIor { index: usize },
    #[error("specular triangle {index}: shading normal opposes the geometric normal")]
    InconsistentNormal { index: usize },
}
