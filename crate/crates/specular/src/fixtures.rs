//! Deterministic fixtures shared by tests, verification suites, and the
//! bundled example scenes: hand-constructed geometries whose admissible
//! chains have closed forms, plus seeded random-case generators for the
//! fuzz corpora.

use crate::polynomialize::{build_system, resolve_chain, ChainClass, ChainType, SpecularSystem};
use crate::scene::{
    BarycentricCoord, Camera, NormalMode, PointLight, Scene, Separators, SpecularTriangle,
    Triangle, Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// --- analytic fixtures ---

/// Large triangle in the z = 0 plane containing the origin region, facing
/// +z. A mirror when `eta_in == eta_out`, a refractive interface otherwise.
pub fn flat_specular_triangle(eta_in: f64) -> SpecularTriangle {
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

/// Scene wrapper for solver-only fixtures (no lights, no occluders).
pub fn solver_scene(tris: Vec<SpecularTriangle>) -> Scene {
    Scene::new(tris, vec![], vec![], Camera::basic(Vec3::new(0.0, 0.0, 5.0)))
        .expect("fixture scene is valid")
}

pub struct MirrorFixture {
    pub scene: Scene,
    pub seps: Separators,
    /// Reflection point from the image-source construction.
    pub expected_vertex: Vec3,
    pub expected_bc: BarycentricCoord,
}

/// Flat mirror with endpoints at (0,0,1) and (1,0,1): reflecting the far
/// endpoint across z = 0 and intersecting the connecting line gives the
/// unique reflection point (0.5, 0, 0).
pub fn mirror_fixture() -> MirrorFixture {
    MirrorFixture {
        scene: solver_scene(vec![flat_specular_triangle(1.0)]),
        seps: Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0)),
        expected_vertex: Vec3::new(0.5, 0.0, 0.0),
        expected_bc: BarycentricCoord::new(0.5, 0.4),
    }
}

pub struct InterfaceFixture {
    pub scene: Scene,
    pub seps: Separators,
    /// Crossing x from the one-dimensional Fermat solve.
    pub expected_x: f64,
}

/// Flat interface with endpoints at (0,0,1) and (1,0,-1): the refraction
/// point lies on the segment y = 0, z = 0 at the x minimizing optical path
/// length, computed here by bisection on the path-length derivative.
pub fn interface_fixture(eta_in: f64) -> InterfaceFixture {
    InterfaceFixture {
        scene: solver_scene(vec![flat_specular_triangle(eta_in)]),
        seps: Separators::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, -1.0)),
        expected_x: fermat_crossing_x(1.0, 1.0, 1.0, 1.0, eta_in),
    }
}

/// One-dimensional Fermat solve for a flat interface in the z = 0 plane:
/// start at height `h0` above, end at depth `h1` below and `dx` across.
/// Returns the crossing abscissa minimizing
/// `eta_out * sqrt(x^2 + h0^2) + eta_in * sqrt((dx-x)^2 + h1^2)`,
/// by 60 bisection steps on the monotone derivative.
pub fn fermat_crossing_x(h0: f64, h1: f64, dx: f64, eta_out: f64, eta_in: f64) -> f64 {
    let d = |x: f64| -> f64 {
        eta_out * x / (x * x + h0 * h0).sqrt()
            - eta_in * (dx - x) / ((dx - x) * (dx - x) + h1 * h1).sqrt()
    };
    let (mut lo, mut hi) = (0.0f64, dx);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if d(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub struct PeriscopeFixture {
    pub scene: Scene,
    pub seps: Separators,
    /// Bounce points on the lower and upper mirror, from composing the two
    /// image-source reflections.
    pub expected_vertices: [Vec3; 2],
}

/// Two parallel horizontal mirrors (z = 0 and z = 2) with both endpoints
/// between them: the unique two-bounce path reflects at (-0.5, 0, 0) and
/// (0.5, 0, 2), obtained by mirroring the start across z = 0 and the end
/// across z = 2 and intersecting the straight line with both planes.
pub fn periscope_fixture() -> PeriscopeFixture {
    let lower = SpecularTriangle {
        positions: [
            Vec3::new(-5.0, -3.0, 0.0),
            Vec3::new(3.0, -3.0, 0.0),
            Vec3::new(-5.0, 5.0, 0.0),
        ],
        shading_normals: [Vec3::new(0.0, 0.0, 1.0); 3],
        normal_mode: NormalMode::Face,
        eta_out: 1.0,
        eta_in: 1.0,
    };
    let upper = SpecularTriangle {
        positions: [
            Vec3::new(-3.0, -3.0, 2.0),
            Vec3::new(5.0, -3.0, 2.0),
            Vec3::new(-3.0, 5.0, 2.0),
        ],
        shading_normals: [Vec3::new(0.0, 0.0, -1.0); 3],
        normal_mode: NormalMode::Face,
        eta_out: 1.0,
        eta_in: 1.0,
    };
    PeriscopeFixture {
        scene: solver_scene(vec![lower, upper]),
        seps: Separators::new(Vec3::new(-1.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0)),
        expected_vertices: [Vec3::new(-0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 2.0)],
    }
}

/// Mirror image of a point across the (infinite) plane of a triangle.
pub fn mirror_image_point(p: Vec3, tri: &SpecularTriangle) -> Vec3 {
    let n = tri.geometric_normal().normalize();
    p - n * 2.0 * (p - tri.positions[0]).dot(&n)
}

// --- random corpus generators ---

/// Uniform jitter vector in the centered cube of half-width `r`.
pub fn jitter_vec<R: Rng>(rng: &mut R, r: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-r..r),
        rng.gen_range(-r..r),
        rng.gen_range(-r..r),
    )
}

/// Non-degenerate random triangle around `center` with vertices jittered by
/// `span`, interpolated shading normals tilted off the geometric normal,
/// and a glass-like interior index.
pub fn random_specular_triangle<R: Rng>(rng: &mut R, center: Vec3, span: f64) -> SpecularTriangle {
    loop {
        let p = [
            center + jitter_vec(rng, span),
            center + jitter_vec(rng, span),
            center + jitter_vec(rng, span),
        ];
        let g = (p[1] - p[0]).cross(&(p[2] - p[0]));
        if g.norm() < 0.3 * span * span {
            continue;
        }
        let gn = g.normalize();
        let sn = std::array::from_fn(|_| {
            let jitter = jitter_vec(rng, 1.0);
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

/// A broad, near-flat mirror with a randomly warped normal field: the
/// shading normals tilt independently, so the reflection condition can hold
/// at zero, one, or several interior points.
pub fn warped_mirror<R: Rng>(rng: &mut R) -> SpecularTriangle {
    let positions = [
        Vec3::new(-2.0, -2.0, 0.2 * rng.gen_range(-1.0..1.0)),
        Vec3::new(2.6, -1.8, 0.2 * rng.gen_range(-1.0..1.0)),
        Vec3::new(-1.7, 2.4, 0.2 * rng.gen_range(-1.0..1.0)),
    ];
    let shading_normals =
        std::array::from_fn(|_| (Vec3::new(0.0, 0.0, 1.0) + 0.75 * jitter_vec(rng, 1.0)).normalize());
    SpecularTriangle {
        positions,
        shading_normals,
        normal_mode: NormalMode::Interpolated,
        eta_out: 1.0,
        eta_in: 1.0,
    }
}

/// One random one-bounce configuration with its polynomial system.
pub struct OneBounceCase {
    pub tri: SpecularTriangle,
    pub seps: Separators,
    pub chain: ChainType,
    pub sys: SpecularSystem,
}

/// Random reflection case: triangle near the origin, both endpoints above.
/// `None` when the sampled geometry does not resolve or build.
pub fn random_mirror_case(seed: u64) -> Option<OneBounceCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tri = random_specular_triangle(&mut rng, Vec3::zeros(), 1.0);
    let seps = Separators::new(
        Vec3::new(0.0, 0.0, 2.0) + jitter_vec(&mut rng, 0.5),
        Vec3::new(0.5, 0.0, 2.0) + jitter_vec(&mut rng, 0.5),
    );
    let chain = resolve_chain(ChainClass::R, &seps, &[&tri]).ok()?;
    let sys = build_system(&seps, &[&tri], &chain).ok()?;
    Some(OneBounceCase {
        tri,
        seps,
        chain,
        sys,
    })
}

/// Random transmission case: triangle near the origin, endpoints on
/// opposite sides.
pub fn random_interface_case(seed: u64) -> Option<OneBounceCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tri = random_specular_triangle(&mut rng, Vec3::zeros(), 1.0);
    let above = Vec3::new(0.0, 0.0, 2.0) + jitter_vec(&mut rng, 0.5);
    let below = Vec3::new(0.3, 0.2, -2.0) + jitter_vec(&mut rng, 0.5);
    let seps = Separators::new(above, below);
    let chain = resolve_chain(ChainClass::T, &seps, &[&tri]).ok()?;
    let sys = build_system(&seps, &[&tri], &chain).ok()?;
    Some(OneBounceCase {
        tri,
        seps,
        chain,
        sys,
    })
}

/// One random two-bounce configuration with its polynomial system.
pub struct TwoBounceCase {
    pub tris: [SpecularTriangle; 2],
    pub seps: Separators,
    pub chain: ChainType,
    pub sys: SpecularSystem,
}

/// Random double-reflection case: two stacked triangles, endpoints beyond
/// each.
pub fn random_two_bounce_case(seed: u64) -> Option<TwoBounceCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tri1 = random_specular_triangle(&mut rng, Vec3::zeros(), 1.0);
    let tri2 = random_specular_triangle(&mut rng, Vec3::new(0.0, 0.0, 2.5), 1.0);
    let seps = Separators::new(
        Vec3::new(0.0, 0.0, -2.0) + jitter_vec(&mut rng, 0.5),
        Vec3::new(0.0, 0.0, 4.5) + jitter_vec(&mut rng, 0.5),
    );
    let chain = resolve_chain(ChainClass::RR, &seps, &[&tri1, &tri2]).ok()?;
    let sys = build_system(&seps, &[&tri1, &tri2], &chain).ok()?;
    Some(TwoBounceCase {
        tris: [tri1, tri2],
        seps,
        chain,
        sys,
    })
}

// --- renderable fixtures ---

/// Unit-albedo grey floor square on z = `z` spanning `half` in x and y,
/// split into two triangles.
pub fn floor_quad(z: f64, half: f64, albedo: [f64; 3]) -> [Triangle; 2] {
    let a = Vec3::new(-half, -half, z);
    let b = Vec3::new(half, -half, z);
    let c = Vec3::new(half, half, z);
    let d = Vec3::new(-half, half, z);
    [
        Triangle {
            positions: [a, b, c],
            albedo,
        },
        Triangle {
            positions: [a, c, d],
            albedo,
        },
    ]
}

/// Caustic fixture: a point light, a vertical flat mirror at x = 1.2, and a
/// diffuse floor at z = 0 seen from above. The mirror throws a triangular
/// patch of reflected light onto the floor whose outline follows exactly
/// from the image-source construction, giving a closed-form lit-pixel mask.
pub fn caustic_scene(resolution: (u32, u32)) -> Scene {
    let mirror = SpecularTriangle {
        positions: [
            Vec3::new(1.2, -0.6, 0.5),
            Vec3::new(1.2, 0.6, 0.5),
            Vec3::new(1.2, 0.0, 1.3),
        ],
        shading_normals: [Vec3::new(-1.0, 0.0, 0.0); 3],
        normal_mode: NormalMode::Face,
        eta_out: 1.0,
        eta_in: 1.0,
    };
    let floor = floor_quad(0.0, 2.0, [0.7, 0.7, 0.7]);
    let light = PointLight {
        position: Vec3::new(-1.0, 0.5, 1.5),
        power: [40.0, 40.0, 40.0],
    };
    let camera = Camera {
        position: Vec3::new(0.0, 0.0, 4.0),
        look_at: Vec3::new(0.0, 0.0, 0.0),
        up: Vec3::new(0.0, 1.0, 0.0),
        fov_y_deg: 55.0,
        resolution,
    };
    Scene::new(vec![mirror], floor.to_vec(), vec![light], camera).expect("caustic scene is valid")
}

/// Two-bounce render fixture: a diffuse floor, two warped mirrors stacked
/// above it, and a light between them. Double-reflection chains land in a
/// patterned patch on the floor that shifts with solver settings, which
/// makes it the scan-sensitivity fixture.
pub fn two_bounce_scene(seed: u64, resolution: (u32, u32)) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lower = warped_mirror(&mut rng);
    let mut upper = warped_mirror(&mut rng);
    for p in &mut lower.positions {
        p.z += 1.2;
    }
    for p in &mut upper.positions {
        p.z = 3.4 - p.z;
    }
    for n in &mut upper.shading_normals {
        n.z = -n.z;
    }
    let floor = floor_quad(0.0, 3.0, [0.8, 0.8, 0.8]);
    let light = PointLight {
        position: Vec3::new(2.4, 0.0, 2.3),
        power: [60.0, 60.0, 60.0],
    };
    let camera = Camera {
        position: Vec3::new(0.0, 0.0, 6.5),
        look_at: Vec3::new(0.0, 0.0, 0.0),
        up: Vec3::new(0.0, 1.0, 0.0),
        fov_y_deg: 50.0,
        resolution,
    };
    Scene::new(vec![lower, upper], floor.to_vec(), vec![light], camera)
        .expect("two-bounce scene is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fermat_crossing_matches_snell() {
        // the bisection result must satisfy Snell's law at the crossing
        let eta_in = 1.5;
        let x = fermat_crossing_x(1.0, 1.0, 1.0, 1.0, eta_in);
        let sin_i = x / (x * x + 1.0).sqrt();
        let sin_t = (1.0 - x) / ((1.0 - x) * (1.0 - x) + 1.0).sqrt();
        assert!((sin_i - eta_in * sin_t).abs() < 1e-12);
        // symmetric media degenerate to the straight crossing
        assert!((fermat_crossing_x(1.0, 1.0, 1.0, 1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn periscope_expected_path_obeys_reflection() {
        let fx = periscope_fixture();
        let [a, b] = fx.expected_vertices;
        // mirror the start across the lower plane, the end across the upper
        let s = mirror_image_point(fx.seps.x0, &fx.scene.triangles[0]);
        let e = mirror_image_point(fx.seps.x_k1, &fx.scene.triangles[1]);
        // both bounce points lie on the straight unfolded line
        let d = (e - s).normalize();
        assert!(((a - s) - d * (a - s).dot(&d)).norm() < 1e-12);
        assert!(((b - s) - d * (b - s).dot(&d)).norm() < 1e-12);
        // and inside their triangles
        for (p, tri) in [(a, &fx.scene.triangles[0]), (b, &fx.scene.triangles[1])] {
            let e1 = tri.edge1();
            let e2 = tri.edge2();
            let rel = p - tri.positions[0];
            let u = rel.dot(&e1) / e1.norm_squared();
            let v = rel.dot(&e2) / e2.norm_squared();
            assert!(u > 0.0 && v > 0.0 && u + v < 1.0, "({u}, {v})");
        }
    }

    #[test]
    fn mirror_image_point_is_an_involution() {
        let tri = flat_specular_triangle(1.0);
        let p = Vec3::new(0.3, -0.2, 1.7);
        let q = mirror_image_point(p, &tri);
        assert!((q - Vec3::new(0.3, -0.2, -1.7)).norm() < 1e-14);
        assert!((mirror_image_point(q, &tri) - p).norm() < 1e-14);
    }

    #[test]
    fn corpus_generators_are_reproducible() {
        let a = random_mirror_case(2024).unwrap();
        let b = random_mirror_case(2024).unwrap();
        assert_eq!(a.tri.positions, b.tri.positions);
        assert_eq!(a.seps.x0, b.seps.x0);
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(warped_mirror(&mut r1).positions, warped_mirror(&mut r2).positions);
    }
}
