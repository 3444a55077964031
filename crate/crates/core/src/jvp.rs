//! Forward-mode variations (JVPs) of the QR and LQ factors.
//!
//! For `A = Q R` with square invertible `R`, differentiating and using the
//! skew-symmetry of `Qᵀ dQ` gives
//!
//! ```text
//! C  = Qᵀ dA R⁻¹
//! dR = (sym(C) ∘ Eᵀ) R
//! dQ = (dA − Q dR) R⁻¹
//! ```
//!
//! The wide QR and deep LQ variants apply this to the leading square block and
//! propagate the remainder (`dV = Qᵀ (dY − dQ V)` and `dV = (dY − V dQ) Qᵀ`).
//! The functions take precomputed factors rather than refactorizing.

use crate::error::{Error, Result};
use crate::factor::{LqFactors, QrFactors};
use crate::matrix::Matrix;
use crate::toolkit::{sym_mask_lower, sym_mask_upper};
use crate::triangular::{solve_lower_triangular, solve_upper_triangular, Side};
use crate::{lq_grad, qr_grad};

/// A perturbation direction `dA` with the primal's shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent(Matrix);

impl Tangent {
    pub fn new(da: Matrix) -> Result<Self> {
        if !da.is_finite() {
            return Err(Error::InvalidInput("tangent must be finite".into()));
        }
        Ok(Tangent(da))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    fn expect_dims(&self, op: &'static str, m: usize, n: usize) -> Result<()> {
        self.0.expect_dims(op, m, n)
    }
}

/// Variation of the QR factors.
#[derive(Debug, Clone, PartialEq)]
pub struct QrTangent {
    pub dq: Matrix,
    pub dr: Matrix,
}

/// Variation of the LQ factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LqTangent {
    pub dl: Matrix,
    pub dq: Matrix,
}

fn zero_below_diagonal(mut a: Matrix) -> Matrix {
    for i in 0..a.rows() {
        let width = i.min(a.cols());
        a.row_mut(i)[..width].fill(0.0);
    }
    a
}

fn zero_above_diagonal(mut a: Matrix) -> Matrix {
    for i in 0..a.rows() {
        if i + 1 < a.cols() {
            a.row_mut(i)[i + 1..].fill(0.0);
        }
    }
    a
}

/// `(dQ, dU)` for `X = Q U` with square upper triangular `U`.
fn qr_square_variation(q: &Matrix, u: &Matrix, dx: &Matrix) -> Result<(Matrix, Matrix)> {
    let c = solve_upper_triangular(u, &q.tr_matmul(dx), Side::Right, false)?;
    let du = zero_below_diagonal(sym_mask_upper(&c).matmul(u));
    let dq = solve_upper_triangular(u, &dx.sub(&q.matmul(&du)), Side::Right, false)?;
    Ok((dq, du))
}

/// `(dU, dQ)` for `X = U Q` with square lower triangular `U`.
fn lq_square_variation(u: &Matrix, q: &Matrix, dx: &Matrix) -> Result<(Matrix, Matrix)> {
    let c = solve_lower_triangular(u, &dx.matmul_tr(q), Side::Left, false)?;
    let du = zero_above_diagonal(u.matmul(&sym_mask_lower(&c)));
    let dq = solve_lower_triangular(u, &dx.sub(&du.matmul(q)), Side::Left, false)?;
    Ok((du, dq))
}

/// QR variation for a square or deep input.
pub fn qr_jvp_deep(f: &QrFactors, da: &Tangent) -> Result<QrTangent> {
    let s = f.shape();
    if s.m < s.n {
        return Err(Error::ShapeMismatch {
            op: "qr_jvp_deep",
            expected: "m >= n".into(),
            found: s.to_string(),
        });
    }
    da.expect_dims("qr_jvp_deep (tangent)", s.m, s.n)?;
    let (dq, dr) = qr_square_variation(f.q(), f.r(), da.matrix())?;
    Ok(QrTangent { dq, dr })
}

/// QR variation for a wide (or square) input, splitting `dA = [dX | dY]`.
pub fn qr_jvp_wide(a: &Matrix, f: &QrFactors, da: &Tangent) -> Result<QrTangent> {
    let s = f.shape();
    if s.m > s.n {
        return Err(Error::ShapeMismatch {
            op: "qr_jvp_wide",
            expected: "m <= n".into(),
            found: s.to_string(),
        });
    }
    a.expect_dims("qr_jvp_wide (input)", s.m, s.n)?;
    da.expect_dims("qr_jvp_wide (tangent)", s.m, s.n)?;
    qr_grad::check_leading_block(a)?;

    let (m, n) = (s.m, s.n);
    let dx = da.matrix().column_block(0..m);
    let dy = da.matrix().column_block(m..n);
    let u = f.r().column_block(0..m);
    let v = f.r().column_block(m..n);
    let (dq, du) = qr_square_variation(f.q(), &u, &dx)?;
    if n == m {
        return Ok(QrTangent { dq, dr: du });
    }
    let dv = f.q().tr_matmul(&dy.sub(&dq.matmul(&v)));
    Ok(QrTangent {
        dq,
        dr: du.hcat(&dv),
    })
}

/// Dispatches to [`qr_jvp_deep`] for `m >= n`, [`qr_jvp_wide`] otherwise.
pub fn qr_jvp(a: &Matrix, f: &QrFactors, da: &Tangent) -> Result<QrTangent> {
    if f.shape().m >= f.shape().n {
        qr_jvp_deep(f, da)
    } else {
        qr_jvp_wide(a, f, da)
    }
}

/// LQ variation for a square or wide input.
pub fn lq_jvp_wide(f: &LqFactors, da: &Tangent) -> Result<LqTangent> {
    let s = f.shape();
    if s.m > s.n {
        return Err(Error::ShapeMismatch {
            op: "lq_jvp_wide",
            expected: "m <= n".into(),
            found: s.to_string(),
        });
    }
    da.expect_dims("lq_jvp_wide (tangent)", s.m, s.n)?;
    let (dl, dq) = lq_square_variation(f.l(), f.q(), da.matrix())?;
    Ok(LqTangent { dl, dq })
}

/// LQ variation for a deep (or square) input, splitting `dA` into `dX`
/// stacked over `dY`.
pub fn lq_jvp_deep(a: &Matrix, f: &LqFactors, da: &Tangent) -> Result<LqTangent> {
    let s = f.shape();
    if s.m < s.n {
        return Err(Error::ShapeMismatch {
            op: "lq_jvp_deep",
            expected: "m >= n".into(),
            found: s.to_string(),
        });
    }
    a.expect_dims("lq_jvp_deep (input)", s.m, s.n)?;
    da.expect_dims("lq_jvp_deep (tangent)", s.m, s.n)?;
    lq_grad::check_leading_block(a)?;

    let (m, n) = (s.m, s.n);
    let dx = da.matrix().row_block(0..n);
    let dy = da.matrix().row_block(n..m);
    let u = f.l().row_block(0..n);
    let v = f.l().row_block(n..m);
    let (du, dq) = lq_square_variation(&u, f.q(), &dx)?;
    if m == n {
        return Ok(LqTangent { dl: du, dq });
    }
    let dv = dy.sub(&v.matmul(&dq)).matmul_tr(f.q());
    Ok(LqTangent {
        dl: du.vcat(&dv),
        dq,
    })
}

/// Dispatches to [`lq_jvp_wide`] for `m <= n`, [`lq_jvp_deep`] otherwise.
pub fn lq_jvp(a: &Matrix, f: &LqFactors, da: &Tangent) -> Result<LqTangent> {
    if f.shape().m <= f.shape().n {
        lq_jvp_wide(f, da)
    } else {
        lq_jvp_deep(a, f, da)
    }
}
