//! Dense polynomial arithmetic over f64: univariate (for resultant entries and
//! the expanded determinant) and bivariate (for the barycentric systems), plus
//! 3-vectors of bivariate polynomials for geometric quantities.
//!
//! Bivariate polynomials are stored as a dense triangular grid of coefficients
//! c_ij for u^i v^j with i + j <= d. Degrees stay small (<= 48 for the largest
//! two-bounce system), so dense multiply is the right trade-off: this is the
//! inner loop of the coefficient phase.
//!
//! Coefficients must stay finite; constructors assert it so a NaN poisons the
//! computation loudly instead of silently.

mod vec;

pub use vec::{PolyVec3, RationalPolyVec3};

/// Hard cap on polynomial total degree. Exceeding it means the symbolic
/// construction blew up, which is a bug, not data.
pub const DEGREE_CAP: usize = 64;

// ---------------------------------------------------------------------------
// Univariate
// ---------------------------------------------------------------------------

/// Univariate polynomial, coefficients ascending by power. Trimmed so the
/// leading coefficient is nonzero (exact-zero trim only); the zero polynomial
/// is an empty coefficient list.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariatePolynomial {
    coeffs: Vec<f64>,
}

impl UnivariatePolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        assert!(
            coeffs.iter().all(|c| c.is_finite()),
            "non-finite coefficient in univariate polynomial"
        );
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        assert!(
            coeffs.len() <= DEGREE_CAP + 1,
            "univariate degree {} exceeds cap {}",
            coeffs.len() - 1,
            DEGREE_CAP
        );
        UnivariatePolynomial { coeffs }
    }

    pub fn zero() -> Self {
        UnivariatePolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree of the trimmed polynomial; 0 for constants and the zero poly.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of x^i (0 beyond the stored degree).
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Horner evaluation with a compensated error term built from error-free
    /// transformations. Costs a few times more than `eval` but stays accurate
    /// to ~1 ulp of the result even under the heavy cancellation near a
    /// cluster of roots, where plain Horner's sign becomes unreliable over a
    /// window much wider than the bisection tolerance.
    pub fn eval_accurate(&self, x: f64) -> f64 {
        #[inline]
        fn two_sum(a: f64, b: f64) -> (f64, f64) {
            let s = a + b;
            let bb = s - a;
            (s, (a - (s - bb)) + (b - bb))
        }
        #[inline]
        fn two_prod(a: f64, b: f64) -> (f64, f64) {
            let p = a * b;
            (p, a.mul_add(b, -p))
        }
        let mut s = 0.0f64;
        let mut e = 0.0f64;
        for &c in self.coeffs.iter().rev() {
            let (p, pi) = two_prod(s, x);
            let (t, sigma) = two_sum(p, c);
            s = t;
            e = e.mul_add(x, pi + sigma);
        }
        s + e
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Self::new(coeffs)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Divide by max |coeff| so the largest coefficient is exactly +-1.
    /// Preserves the root set; errors on the zero polynomial.
    pub fn normalize_max(&self) -> Result<Self, PolyError> {
        let m = self.max_abs_coeff();
        if m == 0.0 {
            return Err(PolyError::NormalizeZero);
        }
        Ok(Self::new(self.coeffs.iter().map(|c| c / m).collect()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.coeff(i) + other.coeff(i);
        }
        Self::new(out)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = self.coeff(i) - other.coeff(i);
        }
        Self::new(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }
}

impl std::fmt::Display for UnivariatePolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*x")?,
                _ => write!(f, "{c}*x^{i}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("cannot normalize the zero polynomial")]
    NormalizeZero,
}

// ---------------------------------------------------------------------------
// Bivariate
// ---------------------------------------------------------------------------

/// Bivariate polynomial in (u, v), dense triangular coefficient grid:
/// coefficient of u^i v^j lives at `idx(i, j)` for i + j <= deg.
///
/// `deg` is the allocated (structural) degree of the grid; the numerically
/// realized degree can be lower. `actual_degree` reports the trimmed one.
#[derive(Clone, Debug, PartialEq)]
pub struct BivariatePolynomial {
    deg: usize,
    coeffs: Vec<f64>,
}

fn tri_len(deg: usize) -> usize {
    (deg + 1) * (deg + 2) / 2
}

impl BivariatePolynomial {
    /// Zero polynomial with an allocated degree.
    pub fn zero(deg: usize) -> Self {
        assert!(deg <= DEGREE_CAP, "bivariate degree {deg} exceeds cap {DEGREE_CAP}");
        BivariatePolynomial {
            deg,
            coeffs: vec![0.0; tri_len(deg)],
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero(0);
        p.set(0, 0, c);
        p
    }

    /// c0 + cu*u + cv*v.
    pub fn linear(c0: f64, cu: f64, cv: f64) -> Self {
        let mut p = Self::zero(1);
        p.set(0, 0, c0);
        p.set(1, 0, cu);
        p.set(0, 1, cv);
        p
    }

    /// Single monomial c * u^i v^j.
    pub fn monomial(c: f64, i: usize, j: usize) -> Self {
        let mut p = Self::zero(i + j);
        p.set(i, j, c);
        p
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + j <= self.deg);
        // row i holds powers u^i v^0 .. u^i v^(deg-i)
        i * (self.deg + 1) - i * (i.wrapping_sub(1)) / 2 + j
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    /// Coefficient of u^i v^j; 0 outside the grid.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.deg {
            0.0
        } else {
            self.coeffs[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, c: f64) {
        assert!(c.is_finite(), "non-finite coefficient in bivariate polynomial");
        let k = self.idx(i, j);
        self.coeffs[k] = c;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Largest total degree with a nonzero coefficient (0 for the zero poly).
    pub fn actual_degree(&self) -> usize {
        for d in (1..=self.deg).rev() {
            for i in 0..=d {
                if self.coeff(i, d - i) != 0.0 {
                    return d;
                }
            }
        }
        0
    }

    /// Largest u-power with a nonzero coefficient (0 for the zero poly).
    pub fn degree_u(&self) -> usize {
        for i in (1..=self.deg).rev() {
            for j in 0..=(self.deg - i) {
                if self.coeff(i, j) != 0.0 {
                    return i;
                }
            }
        }
        0
    }

    /// Largest v-power with a nonzero coefficient (0 for the zero poly).
    pub fn degree_v(&self) -> usize {
        for j in (1..=self.deg).rev() {
            for i in 0..=(self.deg - j) {
                if self.coeff(i, j) != 0.0 {
                    return j;
                }
            }
        }
        0
    }

    /// Copy with the allocated degree shrunk to the actual degree.
    pub fn trimmed(&self) -> Self {
        let d = self.actual_degree();
        if d == self.deg {
            return self.clone();
        }
        let mut out = Self::zero(d);
        for i in 0..=d {
            for j in 0..=(d - i) {
                out.set(i, j, self.coeff(i, j));
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let d = self.deg.max(other.deg);
        let mut out = Self::zero(d);
        for i in 0..=d {
            for j in 0..=(d - i) {
                out.set(i, j, self.coeff(i, j) + other.coeff(i, j));
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let d = self.deg.max(other.deg);
        let mut out = Self::zero(d);
        for i in 0..=d {
            for j in 0..=(d - i) {
                out.set(i, j, self.coeff(i, j) - other.coeff(i, j));
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.deg + other.deg;
        assert!(d <= DEGREE_CAP, "bivariate product degree {d} exceeds cap {DEGREE_CAP}");
        let mut out = Self::zero(d);
        for i1 in 0..=self.deg {
            for j1 in 0..=(self.deg - i1) {
                let c1 = self.coeffs[self.idx(i1, j1)];
                if c1 == 0.0 {
                    continue;
                }
                for i2 in 0..=other.deg {
                    for j2 in 0..=(other.deg - i2) {
                        let c2 = other.coeffs[other.idx(i2, j2)];
                        if c2 == 0.0 {
                            continue;
                        }
                        let k = out.idx(i1 + i2, j1 + j2);
                        out.coeffs[k] += c1 * c2;
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        assert!(s.is_finite());
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= s;
        }
        out
    }

    /// Horner in v inside, Horner in u outside; fixed summation order.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let mut acc = 0.0;
        for i in (0..=self.deg).rev() {
            let mut row = 0.0;
            for j in (0..=(self.deg - i)).rev() {
                row = row * v + self.coeffs[self.idx(i, j)];
            }
            acc = acc * u + row;
        }
        acc
    }

    pub fn derivative_u(&self) -> Self {
        if self.deg == 0 {
            return Self::zero(0);
        }
        let mut out = Self::zero(self.deg - 1);
        for i in 1..=self.deg {
            for j in 0..=(self.deg - i) {
                out.set(i - 1, j, self.coeff(i, j) * i as f64);
            }
        }
        out
    }

    pub fn derivative_v(&self) -> Self {
        if self.deg == 0 {
            return Self::zero(0);
        }
        let mut out = Self::zero(self.deg - 1);
        for i in 0..=(self.deg - 1) {
            for j in 1..=(self.deg - i) {
                out.set(i, j - 1, self.coeff(i, j) * j as f64);
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Divide by max |coeff|; errors on the zero polynomial.
    pub fn normalize_max(&self) -> Result<(Self, f64), PolyError> {
        let m = self.max_abs_coeff();
        if m == 0.0 {
            return Err(PolyError::NormalizeZero);
        }
        Ok((self.scale(1.0 / m), m))
    }

    /// Slices by u-power: returns s with p(u,v) = sum_i s[i](v) * u^i.
    /// Length is deg_u(p) + 1 (of the trimmed u-degree).
    pub fn coeff_slices(&self) -> Vec<UnivariatePolynomial> {
        let du = self.degree_u();
        (0..=du)
            .map(|i| {
                let coeffs = (0..=(self.deg.saturating_sub(i)))
                    .map(|j| self.coeff(i, j))
                    .collect();
                UnivariatePolynomial::new(coeffs)
            })
            .collect()
    }

    /// Rebuild from u-power slices (inverse of `coeff_slices`).
    pub fn from_coeff_slices(slices: &[UnivariatePolynomial]) -> Self {
        let deg = slices
            .iter()
            .enumerate()
            .map(|(i, s)| i + if s.is_zero() { 0 } else { s.degree() })
            .max()
            .unwrap_or(0);
        let mut out = Self::zero(deg);
        for (i, s) in slices.iter().enumerate() {
            for (j, &c) in s.coeffs().iter().enumerate() {
                if c != 0.0 {
                    out.set(i, j, c);
                }
            }
        }
        out
    }

    /// Substitute a fixed v: returns the univariate polynomial p(u, v0).
    pub fn slice_at_v(&self, v0: f64) -> UnivariatePolynomial {
        let coeffs = (0..=self.deg)
            .map(|i| {
                let mut row = 0.0;
                for j in (0..=(self.deg - i)).rev() {
                    row = row * v0 + self.coeffs[self.idx(i, j)];
                }
                row
            })
            .collect();
        UnivariatePolynomial::new(coeffs)
    }
}

impl std::fmt::Display for BivariatePolynomial {
    /// Sorted monomial dump: ascending total degree, v-power ascending inside.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut first = true;
        for d in 0..=self.deg {
            for j in 0..=d {
                let i = d - j;
                let c = self.coeff(i, j);
                if c == 0.0 {
                    continue;
                }
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                write!(f, "{c}")?;
                if i == 1 {
                    write!(f, "*u")?;
                } else if i > 1 {
                    write!(f, "*u^{i}")?;
                }
                if j == 1 {
                    write!(f, "*v")?;
                } else if j > 1 {
                    write!(f, "*v^{j}")?;
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_biv(rng: &mut ChaCha8Rng, deg: usize) -> BivariatePolynomial {
        let mut p = BivariatePolynomial::zero(deg);
        for i in 0..=deg {
            for j in 0..=(deg - i) {
                p.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        p
    }

    #[test]
    fn mul_monomials() {
        let u = BivariatePolynomial::monomial(1.0, 1, 0);
        let v = BivariatePolynomial::monomial(1.0, 0, 1);
        let uv = u.mul(&v);
        assert_eq!(uv.coeff(1, 1), 1.0);
        assert_eq!(uv.actual_degree(), 2);
    }

    #[test]
    fn add_cancels_to_zero() {
        let p = BivariatePolynomial::linear(1.0, 1.0, 0.0);
        let q = BivariatePolynomial::linear(-1.0, -1.0, 0.0);
        let s = p.add(&q);
        assert!(s.is_zero());
        assert_eq!(s.actual_degree(), 0);
    }

    #[test]
    fn eval_homomorphism_fuzz() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let deg_p = rng.gen_range(0..5); let p = random_biv(&mut rng, deg_p);
            let deg_q = rng.gen_range(0..5); let q = random_biv(&mut rng, deg_q);
            let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let prod = p.mul(&q).eval(u, v);
            let sum = p.add(&q).eval(u, v);
            let (pe, qe) = (p.eval(u, v), q.eval(u, v));
            let tol = 1e-10 * (1.0 + pe.abs() * qe.abs());
            assert!((prod - pe * qe).abs() < tol, "mul hom: {prod} vs {}", pe * qe);
            assert!((sum - (pe + qe)).abs() < 1e-10 * (1.0 + (pe + qe).abs()));
        }
    }

    #[test]
    fn eval_examples() {
        // p = u^2 + v
        let mut p = BivariatePolynomial::zero(2);
        p.set(2, 0, 1.0);
        p.set(0, 1, 1.0);
        assert_eq!(p.eval(2.0, 3.0), 7.0);
        assert_eq!(BivariatePolynomial::zero(3).eval(0.4, -2.0), 0.0);
    }

    #[test]
    fn eval_matches_naive_monomial_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let deg_p = rng.gen_range(0..8); let p = random_biv(&mut rng, deg_p);
            let (u, v): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let mut naive = 0.0;
            for i in 0..=p.deg() {
                for j in 0..=(p.deg() - i) {
                    naive += p.coeff(i, j) * u.powi(i as i32) * v.powi(j as i32);
                }
            }
            let h = p.eval(u, v);
            assert!((h - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
        }
    }

    #[test]
    fn slices_examples() {
        // p = u^2 + u*v + 3 -> [3, v, 1]
        let mut p = BivariatePolynomial::zero(2);
        p.set(2, 0, 1.0);
        p.set(1, 1, 1.0);
        p.set(0, 0, 3.0);
        let s = p.coeff_slices();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], UnivariatePolynomial::constant(3.0));
        assert_eq!(s[1], UnivariatePolynomial::new(vec![0.0, 1.0]));
        assert_eq!(s[2], UnivariatePolynomial::constant(1.0));

        // p = v^3 -> [v^3]
        let p = BivariatePolynomial::monomial(1.0, 0, 3);
        let s = p.coeff_slices();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0], UnivariatePolynomial::new(vec![0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn slices_round_trip_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let deg_p = rng.gen_range(0..10); let p = random_biv(&mut rng, deg_p);
            let r = BivariatePolynomial::from_coeff_slices(&p.coeff_slices());
            for i in 0..=p.deg() {
                for j in 0..=(p.deg() - i) {
                    assert_eq!(p.coeff(i, j), r.coeff(i, j));
                }
            }
        }
    }

    #[test]
    fn uni_derivative_examples() {
        let x3 = UnivariatePolynomial::new(vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(x3.derivative(), UnivariatePolynomial::new(vec![0.0, 0.0, 3.0]));
        assert!(UnivariatePolynomial::constant(5.0).derivative().is_zero());
    }

    #[test]
    fn uni_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..200 {
            let deg = rng.gen_range(1..8);
            let p = UnivariatePolynomial::new(
                (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            );
            let x: f64 = rng.gen_range(-1.0..1.0);
            let h = 1e-5;
            let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
            let an = p.derivative().eval(x);
            assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{fd} vs {an}");
        }
    }

    #[test]
    fn uni_normalize() {
        let p = UnivariatePolynomial::new(vec![2.0, -4.0, 1.0]);
        let n = p.normalize_max().unwrap();
        assert_eq!(n.coeffs(), &[0.5, -1.0, 0.25]);
        assert!((n.max_abs_coeff() - 1.0).abs() < 1e-300);
        // sign pattern preserved
        for (a, b) in p.coeffs().iter().zip(n.coeffs()) {
            assert_eq!(a.signum(), b.signum());
        }
        assert_eq!(
            UnivariatePolynomial::zero().normalize_max(),
            Err(PolyError::NormalizeZero)
        );
    }

    #[test]
    fn slice_at_v_consistent_with_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let deg_p = rng.gen_range(0..7); let p = random_biv(&mut rng, deg_p);
            let v = rng.gen_range(-1.0..1.0);
            let u = rng.gen_range(-1.0..1.0);
            let s = p.slice_at_v(v);
            assert!((s.eval(u) - p.eval(u, v)).abs() < 1e-12 * (1.0 + p.eval(u, v).abs()));
        }
    }

    #[test]
    fn display_sorted_monomials() {
        let mut p = BivariatePolynomial::zero(2);
        p.set(0, 0, 3.0);
        p.set(1, 1, 2.0);
        p.set(2, 0, 1.0);
        assert_eq!(p.to_string(), "3 + 1*u^2 + 2*u*v");
    }
}
