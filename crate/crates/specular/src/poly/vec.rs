//! 3-vectors whose components are bivariate polynomials. These carry the
//! polynomial-valued geometric quantities (directions, normals, tangents)
//! through the system construction.

use super::BivariatePolynomial;
use crate::scene::Vec3;

#[derive(Clone, Debug)]
pub struct PolyVec3 {
    pub x: BivariatePolynomial,
    pub y: BivariatePolynomial,
    pub z: BivariatePolynomial,
}

impl PolyVec3 {
    pub fn constant(v: Vec3) -> Self {
        PolyVec3 {
            x: BivariatePolynomial::constant(v.x),
            y: BivariatePolynomial::constant(v.y),
            z: BivariatePolynomial::constant(v.z),
        }
    }

    /// Barycentric interpolation a*(1-u-v) + b*u + c*v, linear in (u, v).
    pub fn interpolate(a: Vec3, b: Vec3, c: Vec3) -> Self {
        let comp = |a0: f64, b0: f64, c0: f64| BivariatePolynomial::linear(a0, b0 - a0, c0 - a0);
        PolyVec3 {
            x: comp(a.x, b.x, c.x),
            y: comp(a.y, b.y, c.y),
            z: comp(a.z, b.z, c.z),
        }
    }

    /// Componentwise combination with polynomial weights:
    /// a*wa + b*wb + c*wc. Used by the rational coordinate mapping where the
    /// barycentric weights are themselves polynomials.
    pub fn weighted(a: Vec3, wa: &BivariatePolynomial, b: Vec3, wb: &BivariatePolynomial, c: Vec3, wc: &BivariatePolynomial) -> Self {
        let comp = |a0: f64, b0: f64, c0: f64| {
            wa.scale(a0).add(&wb.scale(b0)).add(&wc.scale(c0))
        };
        PolyVec3 {
            x: comp(a.x, b.x, c.x),
            y: comp(a.y, b.y, c.y),
            z: comp(a.z, b.z, c.z),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        PolyVec3 { x: self.x.add(&o.x), y: self.y.add(&o.y), z: self.z.add(&o.z) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        PolyVec3 { x: self.x.sub(&o.x), y: self.y.sub(&o.y), z: self.z.sub(&o.z) }
    }

    pub fn scale(&self, s: f64) -> Self {
        PolyVec3 { x: self.x.scale(s), y: self.y.scale(s), z: self.z.scale(s) }
    }

    /// Multiply every component by a polynomial.
    pub fn scale_poly(&self, p: &BivariatePolynomial) -> Self {
        PolyVec3 { x: self.x.mul(p), y: self.y.mul(p), z: self.z.mul(p) }
    }

    pub fn dot(&self, o: &Self) -> BivariatePolynomial {
        self.x.mul(&o.x).add(&self.y.mul(&o.y)).add(&self.z.mul(&o.z))
    }

    pub fn cross(&self, o: &Self) -> Self {
        PolyVec3 {
            x: self.y.mul(&o.z).sub(&self.z.mul(&o.y)),
            y: self.z.mul(&o.x).sub(&self.x.mul(&o.z)),
            z: self.x.mul(&o.y).sub(&self.y.mul(&o.x)),
        }
    }

    pub fn norm_sq(&self) -> BivariatePolynomial {
        self.dot(self)
    }

    pub fn eval(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new(self.x.eval(u, v), self.y.eval(u, v), self.z.eval(u, v))
    }

    /// Largest allocated component degree.
    pub fn deg(&self) -> usize {
        self.x.deg().max(self.y.deg()).max(self.z.deg())
    }
}

/// Rational vector num/den. The denominator is shared by all components,
/// matching the rational coordinate mapping (and the rationalized refraction
/// direction) where a single scalar denominator divides the whole vector.
#[derive(Clone, Debug)]
pub struct RationalPolyVec3 {
    pub num: PolyVec3,
    pub den: BivariatePolynomial,
}

impl RationalPolyVec3 {
    pub fn new(num: PolyVec3, den: BivariatePolynomial) -> Self {
        assert!(!den.is_zero(), "rational vector with identically zero denominator");
        RationalPolyVec3 { num, den }
    }

    /// Polynomial vector embedded with denominator 1.
    pub fn from_poly(num: PolyVec3) -> Self {
        RationalPolyVec3 { num, den: BivariatePolynomial::constant(1.0) }
    }

    pub fn eval(&self, u: f64, v: f64) -> Option<Vec3> {
        let d = self.den.eval(u, v);
        if d == 0.0 {
            return None;
        }
        Some(self.num.eval(u, v) / d)
    }
}
