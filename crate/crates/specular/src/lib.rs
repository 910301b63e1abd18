//! Deterministic solver for specular light chains.
//!
//! Given two fixed endpoints and an ordered tuple of specular triangles, the
//! solver finds every admissible chain of pure reflection/refraction events
//! connecting them. Per-vertex specular constraints are turned into a
//! bivariate polynomial system in the first vertex's barycentric coordinates;
//! the hidden-variable Bezout resultant reduces that system to one univariate
//! determinant whose real roots in [0,1] are found by deterministic
//! isolation or a piecewise sign scan — no multivariate Newton searching
//! from seeds anywhere.
//!
//! Module map:
//! - [`scene`]: geometry, interpolation, ray casting, visibility, file loader
//! - [`poly`]: dense uni/bivariate polynomial arithmetic and polynomial vectors
//! - [`polynomialize`]: per-chain-type construction of the bivariate systems
//! - [`resultant`]: Bezout (and test-oracle Sylvester) matrices, determinants
//! - [`rootfind`]: univariate isolation, determinant sign scan, polish
//! - [`pipeline`]: the three-phase solve, validation, bookkeeping
//! - [`oracle`]: brute-force reference solvers and solution-set comparison
//! - [`fixtures`]: seeded random configurations and hand-built fixtures
//! - [`render`]: caustic renderer (PPM + float sidecar)
//! - [`verify`]: the named verification suites behind `specular verify`
//! - [`tol`]: every pinned tolerance constant

pub mod oracle;
pub mod pipeline;
pub mod poly;
pub mod polynomialize;
pub mod render;
pub mod resultant;
pub mod rootfind;
pub mod scene;
pub mod tol;
pub mod verify;

pub mod fixtures;
