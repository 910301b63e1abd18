//! Hidden-variable elimination. The bivariate system (a, b) in (u, v) is
//! collapsed to a single variable by treating v as hidden: slice a and b by
//! u-power into univariate polynomials a_i(v), b_i(v) and build the n x n
//! Bezout matrix R(v) with n = max(deg_u a, deg_u b). det R(v*) vanishes
//! wherever the pair shares a root (u*, v*).
//!
//! Entry convention (0-based i, j):
//!
//!   R[i][j] = sum_{k=0}^{min(i, n-1-j)} ( a_{j+1+k} b_{i-k} - b_{j+1+k} a_{i-k} )
//!
//! which for n = 1 gives a_1 b_0 - b_1 a_0 (the classical Bezoutian sign).
//! The matrix is filled by the row recurrence
//! R[i][j] = w(i, j+1) + R[i-1][j+1], one polynomial multiply-add per entry.
//!
//! For small n the determinant is expanded symbolically (memoized Laplacian
//! over column subsets); for large n it is evaluated numerically per v by
//! row-equilibrated, partially-pivoted Gaussian elimination in double-double
//! arithmetic, reported in sign-and-exponent form (`DetSample`) because an
//! n x n determinant's magnitude scales like the n-th power of its entry
//! scale and leaves the f64 range for the larger chain systems.

use crate::poly::{BivariatePolynomial, UnivariatePolynomial};
use crate::tol;
use twofloat::TwoFloat;

/// Square matrix of univariate polynomials, row-major.
#[derive(Clone, Debug)]
pub struct PolyMatrix {
    n: usize,
    entries: Vec<UnivariatePolynomial>,
}

impl PolyMatrix {
    pub fn from_entries(n: usize, entries: Vec<UnivariatePolynomial>) -> Self {
        assert_eq!(entries.len(), n * n);
        PolyMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &UnivariatePolynomial {
        &self.entries[i * self.n + j]
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.max_abs_coeff()))
    }

    /// Text dump for regression fixtures.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for i in 0..self.n {
            for j in 0..self.n {
                writeln!(s, "[{i}][{j}] {}", self.entry(i, j)).unwrap();
            }
        }
        s
    }
}

/// Bezout resultant matrix in the hidden variable, plus the conditioning
/// scale applied to its entries (1.0 when raw).
#[derive(Clone, Debug)]
pub struct ResultantMatrix {
    pub matrix: PolyMatrix,
    pub cond_scale: f64,
}

impl std::ops::Deref for ResultantMatrix {
    type Target = PolyMatrix;
    fn deref(&self) -> &PolyMatrix {
        &self.matrix
    }
}

impl ResultantMatrix {
    /// Uniformly rescales all entries so the largest coefficient is 1,
    /// recording the factor. Scales det by cond_scale^n; roots unchanged.
    pub fn conditioned(mut self) -> Self {
        let m = self.matrix.max_abs_coeff();
        if m > 0.0 {
            let s = 1.0 / m;
            for e in &mut self.matrix.entries {
                *e = e.scale(s);
            }
            self.cond_scale *= s;
        }
        self
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ResultantError {
    #[error("system has no u dependence: both polynomials are constant in u")]
    NoUDependence,
    #[error("Laplacian expansion capped at n = {cap}, matrix has n = {n}; use det_eval")]
    ExpansionTooLarge { n: usize, cap: usize },
}

fn slice_or_zero(slices: &[UnivariatePolynomial], k: usize) -> UnivariatePolynomial {
    slices.get(k).cloned().unwrap_or_else(UnivariatePolynomial::zero)
}

/// Builds the Bezout matrix of (a, b) with v hidden. The lower-degree
/// polynomial is zero-padded to n = max(deg_u a, deg_u b). Errors when
/// neither polynomial depends on u.
pub fn bezout_matrix(
    a: &BivariatePolynomial,
    b: &BivariatePolynomial,
) -> Result<ResultantMatrix, ResultantError> {
    let sa = a.coeff_slices();
    let sb = b.coeff_slices();
    let n = (sa.len() - 1).max(sb.len() - 1);
    if n == 0 {
        return Err(ResultantError::NoUDependence);
    }
    // w(p, q) = a_q * b_p - b_q * a_p
    let w = |p: usize, q: usize| -> UnivariatePolynomial {
        let (ap, aq) = (slice_or_zero(&sa, p), slice_or_zero(&sa, q));
        let (bp, bq) = (slice_or_zero(&sb, p), slice_or_zero(&sb, q));
        aq.mul(&bp).sub(&bq.mul(&ap))
    };
    // Fill the upper triangle (the recurrence for i <= j only consults
    // entries with i' <= j') and mirror it, making symmetry exact rather
    // than up-to-rounding.
    let mut entries = vec![UnivariatePolynomial::zero(); n * n];
    for i in 0..n {
        for j in (i..n).rev() {
            let mut e = w(i, j + 1);
            if i >= 1 && j + 1 < n {
                e = e.add(&entries[(i - 1) * n + (j + 1)]);
            }
            entries[i * n + j] = e.clone();
            entries[j * n + i] = e;
        }
    }
    Ok(ResultantMatrix {
        matrix: PolyMatrix::from_entries(n, entries),
        cond_scale: 1.0,
    })
}

/// Classical Sylvester matrix of (a, b) in u with v hidden; order
/// deg_u a + deg_u b. Test oracle for the Bezout construction.
pub fn sylvester_matrix(
    a: &BivariatePolynomial,
    b: &BivariatePolynomial,
) -> Result<PolyMatrix, ResultantError> {
    let sa = a.coeff_slices();
    let sb = b.coeff_slices();
    let (m, n) = (sa.len() - 1, sb.len() - 1);
    if m == 0 && n == 0 {
        return Err(ResultantError::NoUDependence);
    }
    let order = m + n;
    let mut entries = vec![UnivariatePolynomial::zero(); order * order];
    // n rows of a's descending coefficients, shifted right per row
    for r in 0..n {
        for (k, s) in sa.iter().rev().enumerate() {
            entries[r * order + r + k] = s.clone();
        }
    }
    // m rows of b's descending coefficients
    for r in 0..m {
        for (k, s) in sb.iter().rev().enumerate() {
            entries[(n + r) * order + r + k] = s.clone();
        }
    }
    Ok(PolyMatrix::from_entries(order, entries))
}

/// Symbolic determinant by memoized Laplacian expansion over column subsets.
/// Exponential in n, so capped; larger matrices go through `det_eval`.
pub fn expand_determinant(m: &PolyMatrix) -> Result<UnivariatePolynomial, ResultantError> {
    let n = m.n;
    if n > tol::EXPAND_MAX_N {
        return Err(ResultantError::ExpansionTooLarge { n, cap: tol::EXPAND_MAX_N });
    }
    let full: u32 = (1u32 << n) - 1;
    let mut memo: Vec<Option<UnivariatePolynomial>> = vec![None; 1 << n];
    memo[0] = Some(UnivariatePolynomial::constant(1.0));
    fn minor(
        m: &PolyMatrix,
        mask: u32,
        memo: &mut Vec<Option<UnivariatePolynomial>>,
    ) -> UnivariatePolynomial {
        if let Some(p) = &memo[mask as usize] {
            return p.clone();
        }
        let n = m.n;
        let row = n - mask.count_ones() as usize;
        let mut acc = UnivariatePolynomial::zero();
        let mut sign = 1.0;
        for c in 0..n {
            if mask & (1 << c) == 0 {
                continue;
            }
            let e = m.entry(row, c);
            if !e.is_zero() {
                let sub = minor(m, mask & !(1 << c), memo);
                acc = acc.add(&e.mul(&sub).scale(sign));
            }
            sign = -sign;
        }
        memo[mask as usize] = Some(acc.clone());
        acc
    }
    Ok(minor(m, full, &mut memo))
}

/// Determinant value in sign-and-exponent form: det = mantissa * 2^exp2.
///
/// The magnitude of an n x n determinant scales like the n-th power of its
/// entry scale, which leaves the representable range of f64 long before n
/// reaches the sizes the two-bounce systems produce. Carrying the exponent
/// separately keeps signs and magnitude ratios meaningful regardless of n.
#[derive(Clone, Copy, Debug)]
pub struct DetSample {
    /// Sign-carrying mantissa; zero exactly when the determinant is zero,
    /// otherwise renormalized near [1, 2).
    pub mantissa: f64,
    /// Power-of-two exponent.
    pub exp2: i64,
}

impl DetSample {
    pub const ZERO: DetSample = DetSample { mantissa: 0.0, exp2: 0 };

    pub fn sign(&self) -> i8 {
        if self.mantissa == 0.0 {
            0
        } else if self.mantissa > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    /// log2 of the magnitude; -inf for an exact zero.
    pub fn log2_abs(&self) -> f64 {
        self.mantissa.abs().log2() + self.exp2 as f64
    }

    /// Saturating conversion: magnitudes beyond the f64 range collapse to
    /// signed zero or infinity.
    pub fn to_f64(&self) -> f64 {
        self.mantissa * (self.exp2.clamp(-1100, 1100) as f64).exp2()
    }
}

/// Divides a power-of-two exponent out of `x` (exactly) and adds it to `exp2`.
fn renorm(x: f64, exp2: &mut i64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log2().floor() as i64;
    *exp2 += e;
    x * ((-e) as f64).exp2()
}

/// Entry evaluation for the determinant: Horner in double-double, so the
/// entry values carry (far) sub-ulp error relative to their coefficients.
fn horner_dd(p: &UnivariatePolynomial, v: f64) -> TwoFloat {
    let c = p.coeffs();
    let mut acc = TwoFloat::from(0.0);
    for &ck in c.iter().rev() {
        acc = acc * v + ck;
    }
    acc
}

/// Row-equilibrated, partially-pivoted Gaussian elimination carried out in
/// double-double arithmetic. Plain f64 elimination is not enough here: near
/// its roots a large Bezout determinant dips many orders of magnitude below
/// its surrounding values, and f64 cancellation noise then randomizes the
/// computed sign across whole stretches of the scan grid. Double-double
/// pushes the noise floor to the entry-construction level (~1e-15 relative),
/// which the root-adjacent dips stay comfortably above. Pivot choice is the
/// largest magnitude with the lowest index on ties, so the result is
/// deterministic.
fn det_core(m: &PolyMatrix, v: f64) -> DetSample {
    let n = m.n;
    let mut grid: Vec<TwoFloat> = Vec::with_capacity(n * n);
    for e in &m.entries {
        grid.push(horner_dd(e, v));
    }
    let mut exp2: i64 = 0;
    let mut scale = 1.0f64;
    for r in 0..n {
        let row_max = grid[r * n..(r + 1) * n]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.hi().abs()));
        if row_max == 0.0 {
            return DetSample::ZERO;
        }
        for x in &mut grid[r * n..(r + 1) * n] {
            *x = *x / row_max;
        }
        scale = renorm(scale * row_max, &mut exp2);
    }
    let mut det = TwoFloat::from(1.0);
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_abs = grid[k * n + k].hi().abs();
        for r in (k + 1)..n {
            let a = grid[r * n + k].hi().abs();
            if a > pivot_abs {
                pivot_abs = a;
                pivot_row = r;
            }
        }
        if pivot_abs == 0.0 {
            return DetSample::ZERO;
        }
        if pivot_row != k {
            for c in 0..n {
                grid.swap(k * n + c, pivot_row * n + c);
            }
            det = -det;
        }
        let pivot = grid[k * n + k];
        det = det * pivot;
        let hi = renorm(det.hi(), &mut exp2);
        let rescale = hi / det.hi(); // exact power of two
        det = TwoFloat::try_from((hi, det.lo() * rescale)).unwrap_or_else(|_| TwoFloat::from(hi));
        for r in (k + 1)..n {
            let f = grid[r * n + k] / pivot;
            if f.hi() == 0.0 {
                continue;
            }
            for c in (k + 1)..n {
                grid[r * n + c] = grid[r * n + c] - f * grid[k * n + c];
            }
        }
    }
    let mantissa = renorm(det.hi() * scale, &mut exp2);
    DetSample { mantissa, exp2 }
}

/// Determinant of R(v) in sign-and-exponent form; see `DetSample`.
pub fn det_eval_sample(m: &PolyMatrix, v: f64) -> DetSample {
    det_core(m, v)
}

/// Numeric determinant of R(v) as a plain f64, saturating to zero or
/// infinity when the magnitude leaves the representable range.
pub fn det_eval(m: &PolyMatrix, v: f64) -> f64 {
    det_core(m, v).to_f64()
}
