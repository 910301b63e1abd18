//! Piecewise-rational surrogate for sqrt on [0,1].
//!
//! Six consecutive pieces, each a Moebius function (c0 + c1 x)/(d0 + d1 x),
//! fitted by dense least squares with Sanathanan-Koerner reweighting plus a
//! Lawson-style max-error reweighting pass. Pieces shrink geometrically
//! toward 0 where sqrt's curvature blows up. The fit is certified once on a
//! 1e5-point grid: max absolute error must stay below 1e-3 and every
//! denominator must stay away from zero on its piece.
//!
//! The surrogate is what keeps refraction systems polynomial: sqrt(beta) is
//! replaced by sqrt(B) * (c0 B + c1 beta)/(d0 B + d1 beta) for a per-tuple
//! constant B, which is rational in the coefficients of beta.

use crate::tol;
use std::sync::OnceLock;

/// One Moebius piece valid on [lo, hi].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqrtPiece {
    pub lo: f64,
    pub hi: f64,
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl SqrtPiece {
    pub fn eval(&self, x: f64) -> f64 {
        (self.c0 + self.c1 * x) / (self.d0 + self.d1 * x)
    }
}

/// The certified six-piece approximation of sqrt over [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct SqrtApprox {
    pub pieces: Vec<SqrtPiece>,
}

#[derive(Debug, thiserror::Error)]
pub enum SqrtFitError {
    #[error("sqrt fit failed certification: max error {err:e} on piece {piece} (bound {bound:e})")]
    Certification { piece: usize, err: f64, bound: f64 },
    #[error("sqrt fit denominator too close to zero on piece {piece}: min |den| = {min:e}")]
    Denominator { piece: usize, min: f64 },
    #[error("malformed sqrt table: {0}")]
    Parse(String),
}

/// Piece boundaries. Geometric toward zero: the minimax error of a Moebius
/// fit to sqrt on [0, b] scales like sqrt(b), so the first piece must be
/// tiny and the rest can grow by a roughly constant ratio.
const BREAKS: [f64; 7] = [0.0, 3e-4, 5e-3, 0.028, 0.115, 0.38, 1.0];

fn fit_piece(lo: f64, hi: f64) -> SqrtPiece {
    // Dense sample of the piece.
    let m = 10_000;
    let xs: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();

    // Normalize d0 = 1 and solve the linearized problem
    //   c0 + c1 x - y d1 x = y
    // for (c0, c1, d1) by weighted least squares. Sanathanan-Koerner
    // reweighting (w = 1/den^2 of the previous iterate) converges to the
    // true rational LS; a few Lawson passes (multiply weights by |error|)
    // then push it toward minimax.
    let mut w = vec![1.0f64; m];
    let mut sol = nalgebra::Vector3::new(0.0, 1.0, 0.0);
    for pass in 0..14 {
        let mut ata = nalgebra::Matrix3::<f64>::zeros();
        let mut atb = nalgebra::Vector3::<f64>::zeros();
        for k in 0..m {
            let row = nalgebra::Vector3::new(1.0, xs[k], -ys[k] * xs[k]);
            ata += row * row.transpose() * w[k];
            atb += row * (ys[k] * w[k]);
        }
        sol = ata.lu().solve(&atb).unwrap_or(sol);
        let (c0, c1, d1) = (sol[0], sol[1], sol[2]);
        for k in 0..m {
            let den = 1.0 + d1 * xs[k];
            let sk = 1.0 / (den * den).max(1e-12);
            if pass < 6 {
                w[k] = sk;
            } else {
                // Lawson: emphasize the current worst residuals
                let err = ((c0 + c1 * xs[k]) / den - ys[k]).abs();
                w[k] = (w[k] * (err + 1e-9)).max(1e-18);
            }
        }
        // renormalize weights to keep the normal equations scaled
        let wmax = w.iter().cloned().fold(0.0f64, f64::max);
        for wk in &mut w {
            *wk /= wmax;
        }
    }
    SqrtPiece { lo, hi, c0: sol[0], c1: sol[1], d0: 1.0, d1: sol[2] }
}

impl SqrtApprox {
    /// Fits all pieces and certifies them; errors if any piece misses the
    /// 1e-3 bound or its denominator approaches zero.
    pub fn fit() -> Result<SqrtApprox, SqrtFitError> {
        let pieces = BREAKS.windows(2).map(|w| fit_piece(w[0], w[1])).collect();
        let approx = SqrtApprox { pieces };
        approx.certify(100_000)?;
        Ok(approx)
    }

    /// The process-wide fitted table (computed once, then cached).
    pub fn global() -> &'static SqrtApprox {
        static CACHE: OnceLock<SqrtApprox> = OnceLock::new();
        CACHE.get_or_init(|| SqrtApprox::fit().expect("sqrt surrogate failed certification"))
    }

    /// Single-piece table: the (1,1) rational sqrt(a)(a + 3x)/(3a + x) that
    /// matches sqrt and its first two derivatives at `anchor`, so the relative
    /// error grows like ((x - anchor)/anchor)^3 / 32 away from it. Used to
    /// rebuild a refraction system centered on an already-located candidate,
    /// where the global table's 1e-3 bound would dominate the final accuracy.
    pub fn tangent_at(anchor: f64) -> SqrtApprox {
        let a = anchor.max(f64::MIN_POSITIVE);
        let ra = a.sqrt();
        SqrtApprox {
            pieces: vec![SqrtPiece {
                lo: 0.0,
                hi: 1.0,
                c0: ra * a,
                c1: 3.0 * ra,
                d0: 3.0 * a,
                d1: 1.0,
            }],
        }
    }

    /// Index of the piece containing x (clamped into [0,1]).
    pub fn piece_for(&self, x: f64) -> usize {
        let x = x.clamp(0.0, 1.0);
        self.pieces
            .iter()
            .position(|p| x <= p.hi)
            .unwrap_or(self.pieces.len() - 1)
    }

    /// Surrogate value at x; piece chosen by x itself.
    pub fn eval(&self, x: f64) -> f64 {
        self.pieces[self.piece_for(x)].eval(x)
    }

    /// Walks a dense grid; returns the max absolute error against sqrt, or
    /// an error if certification fails.
    pub fn certify(&self, grid: usize) -> Result<f64, SqrtFitError> {
        let mut worst = 0.0f64;
        for (idx, p) in self.pieces.iter().enumerate() {
            let n = ((p.hi - p.lo) * grid as f64).ceil().max(64.0) as usize;
            let mut piece_worst = 0.0f64;
            let mut den_min = f64::INFINITY;
            for i in 0..=n {
                let x = p.lo + (p.hi - p.lo) * i as f64 / n as f64;
                den_min = den_min.min((p.d0 + p.d1 * x).abs());
                piece_worst = piece_worst.max((p.eval(x) - x.sqrt()).abs());
            }
            if den_min < 1e-3 {
                return Err(SqrtFitError::Denominator { piece: idx, min: den_min });
            }
            if piece_worst >= tol::SQRT_FIT_TOL {
                return Err(SqrtFitError::Certification {
                    piece: idx,
                    err: piece_worst,
                    bound: tol::SQRT_FIT_TOL,
                });
            }
            worst = worst.max(piece_worst);
        }
        Ok(worst)
    }

    /// Table serialization: one `lo hi c0 c1 d0 d1` line per piece.
    pub fn to_table_string(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        for p in &self.pieces {
            writeln!(s, "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}", p.lo, p.hi, p.c0, p.c1, p.d0, p.d1)
                .unwrap();
        }
        s
    }

    pub fn from_table_string(s: &str) -> Result<SqrtApprox, SqrtFitError> {
        let mut pieces = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| SqrtFitError::Parse(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 6 {
                return Err(SqrtFitError::Parse(format!(
                    "line {}: expected 6 fields, got {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            pieces.push(SqrtPiece {
                lo: vals[0],
                hi: vals[1],
                c0: vals[2],
                c1: vals[3],
                d0: vals[4],
                d1: vals[5],
            });
        }
        if pieces.len() != tol::SQRT_PIECES {
            return Err(SqrtFitError::Parse(format!(
                "expected {} pieces, got {}",
                tol::SQRT_PIECES,
                pieces.len()
            )));
        }
        Ok(SqrtApprox { pieces })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_certifies_and_hits_known_values() {
        let f = SqrtApprox::global();
        assert_eq!(f.pieces.len(), tol::SQRT_PIECES);
        assert!((f.eval(0.25) - 0.5).abs() < 1e-3);
        assert!((f.eval(1.0) - 1.0).abs() < 1e-3);
        assert!(f.eval(0.0).abs() < 1e-3);
        let worst = f.certify(100_000).unwrap();
        assert!(worst < tol::SQRT_FIT_TOL, "max error {worst:e}");
    }

    #[test]
    fn pieces_are_contiguous_and_cover_unit_interval() {
        let f = SqrtApprox::global();
        assert_eq!(f.pieces[0].lo, 0.0);
        assert_eq!(f.pieces.last().unwrap().hi, 1.0);
        for w in f.pieces.windows(2) {
            assert_eq!(w[0].hi, w[1].lo);
        }
    }

    #[test]
    fn piece_lookup_matches_ranges() {
        let f = SqrtApprox::global();
        for (i, p) in f.pieces.iter().enumerate() {
            let mid = 0.5 * (p.lo + p.hi);
            assert_eq!(f.piece_for(mid), i);
        }
        assert_eq!(f.piece_for(-0.5), 0);
        assert_eq!(f.piece_for(2.0), f.pieces.len() - 1);
    }

    #[test]
    fn table_round_trip() {
        let f = SqrtApprox::global();
        let s = f.to_table_string();
        let g = SqrtApprox::from_table_string(&s).unwrap();
        assert_eq!(*f, g);
    }

    #[test]
    fn table_parse_errors() {
        assert!(SqrtApprox::from_table_string("1 2 3\n").is_err());
        assert!(SqrtApprox::from_table_string("a b c d e f\n").is_err());
        assert!(SqrtApprox::from_table_string("").is_err());
    }

    #[test]
    fn tangent_table_is_third_order_at_its_anchor() {
        for &a in &[0.03, 0.2, 0.5, 0.9] {
            let t = SqrtApprox::tangent_at(a);
            assert_eq!(t.pieces.len(), 1);
            // exact at the anchor, then cubic growth in the offset
            assert!((t.eval(a) - a.sqrt()).abs() < 1e-14);
            for &frac in &[0.01, 0.03, 0.1] {
                let dx = frac * a;
                for x in [a - dx, a + dx] {
                    let rel = (t.eval(x) - x.sqrt()).abs() / x.sqrt();
                    let bound = frac.powi(3) / 16.0 + 1e-15;
                    assert!(rel < bound, "anchor {a}, x {x}: rel err {rel:e} vs {bound:e}");
                }
            }
        }
    }
}

