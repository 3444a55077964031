//! Reverse-mode gradient of the reduced QR factorization.
//!
//! Given upstream adjoints `Q̄ = ∂ℒ/∂Q` and `R̄ = ∂ℒ/∂R`, the square and deep
//! case is
//!
//! ```text
//! M = R R̄ᵀ − Q̄ᵀ Q
//! Ā = (Q̄ + Q copyltu(M)) R⁻ᵀ
//! ```
//!
//! A wide input is split as `A = [X | Y]`, `R = [U | V]`, `R̄ = [Ū | V̄]`, where
//! `X = Q U` is square and `Y = Q V`. Because `Q` feeds both blocks its adjoint
//! picks up the contribution from `Y`, and the square formula is applied to
//! the leading block:
//!
//! ```text
//! Q̄' = Q̄ + Y V̄ᵀ
//! X̄  = (Q̄' + Q copyltu(U Ūᵀ − Q̄'ᵀ Q)) U⁻ᵀ
//! Ȳ  = Q V̄
//! Ā  = [X̄ | Ȳ]
//! ```
//!
//! All products with `R⁻ᵀ` or `U⁻ᵀ` are triangular solves.

use crate::error::{shape_mismatch, Error, Result};
use crate::factor::{leading_block_condition, LeadingBlock, QrFactors};
use crate::matrix::Matrix;
use crate::toolkit::{copyltu, strict_lower_ones};
use crate::triangular::{solve_upper_triangular, Side};

/// Upstream adjoints of the QR factors: `Q̄` (`m x k`) and `R̄` (`k x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct QrAdjoints {
    q_bar: Matrix,
    r_bar: Matrix,
}

impl QrAdjoints {
    pub fn new(q_bar: Matrix, r_bar: Matrix) -> Result<Self> {
        if !q_bar.is_finite() || !r_bar.is_finite() {
            return Err(Error::InvalidInput("adjoints must be finite".into()));
        }
        Ok(QrAdjoints { q_bar, r_bar })
    }

    /// Zero adjoints conforming to `f`.
    pub fn zeros(f: &QrFactors) -> Self {
        QrAdjoints {
            q_bar: Matrix::zeros(f.q().rows(), f.q().cols()),
            r_bar: Matrix::zeros(f.r().rows(), f.r().cols()),
        }
    }

    pub fn q_bar(&self) -> &Matrix {
        &self.q_bar
    }

    pub fn r_bar(&self) -> &Matrix {
        &self.r_bar
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &QrAdjoints, beta: f64) -> QrAdjoints {
        QrAdjoints {
            q_bar: self.q_bar.scale(alpha).add(&other.q_bar.scale(beta)),
            r_bar: self.r_bar.scale(alpha).add(&other.r_bar.scale(beta)),
        }
    }

    fn check_conforms(&self, f: &QrFactors) -> Result<()> {
        self.q_bar
            .expect_dims("QR backward (Q adjoint)", f.q().rows(), f.q().cols())?;
        self.r_bar
            .expect_dims("QR backward (R adjoint)", f.r().rows(), f.r().cols())
    }
}

/// Column split of a wide problem into its leading square block and the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct WideParts {
    pub x: Matrix,
    pub y: Matrix,
    pub u: Matrix,
    pub v: Matrix,
    pub u_bar: Matrix,
    pub v_bar: Matrix,
}

impl WideParts {
    /// Splits `A`, `R` and `R̄` after their first `m` columns.
    pub fn split(a: &Matrix, f: &QrFactors, g: &QrAdjoints) -> Self {
        let (m, n) = a.dims();
        WideParts {
            x: a.column_block(0..m),
            y: a.column_block(m..n),
            u: f.r().column_block(0..m),
            v: f.r().column_block(m..n),
            u_bar: g.r_bar.column_block(0..m),
            v_bar: g.r_bar.column_block(m..n),
        }
    }
}

/// `(Q̄ + Q copyltu(R R̄ᵀ − Q̄ᵀ Q)) R⁻ᵀ` for square upper triangular `r`.
fn square_backward(q: &Matrix, r: &Matrix, q_bar: &Matrix, r_bar: &Matrix) -> Result<Matrix> {
    let m = r.matmul_tr(r_bar).sub(&q_bar.tr_matmul(q));
    let lhs = q_bar.add(&q.matmul(&copyltu(&m)?));
    solve_upper_triangular(r, &lhs, Side::Right, true)
}

fn forward_dims(f: &QrFactors) -> (usize, usize) {
    (f.shape().m, f.shape().n)
}

/// Gradient for a square or deep input (`m >= n`).
pub fn qr_backward_deep(f: &QrFactors, g: &QrAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    if m < n {
        return Err(shape_mismatch(
            "qr_backward_deep (needs m >= n)",
            (n, n),
            (m, n),
        ));
    }
    g.check_conforms(f)?;
    square_backward(f.q(), f.r(), &g.q_bar, &g.r_bar)
}

/// The same gradient written in the strictly-lower-mask form
///
/// ```text
/// Ā = Q (R̄ + (P_L ∘ (R R̄ᵀ − R̄ Rᵀ + Qᵀ Q̄ − Q̄ᵀ Q)) R⁻ᵀ) + (Q̄ − Q Qᵀ Q̄) R⁻ᵀ
/// ```
///
/// with `P_L` the strictly lower all-ones mask. Slower than
/// [`qr_backward_deep`]; kept as an independent formulation to check it.
pub fn qr_backward_walter(f: &QrFactors, g: &QrAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    if m < n {
        return Err(shape_mismatch(
            "qr_backward_walter (needs m >= n)",
            (n, n),
            (m, n),
        ));
    }
    g.check_conforms(f)?;
    let (q, r) = (f.q(), f.r());
    let (q_bar, r_bar) = (&g.q_bar, &g.r_bar);

    let inner = r
        .matmul_tr(r_bar)
        .sub(&r_bar.matmul_tr(r))
        .add(&q.tr_matmul(q_bar))
        .sub(&q_bar.tr_matmul(q));
    let masked = strict_lower_ones(n).hadamard(&inner);
    let coupled = r_bar.add(&solve_upper_triangular(r, &masked, Side::Right, true)?);
    let projected = q_bar.sub(&q.matmul(&q.tr_matmul(q_bar)));
    let residual = solve_upper_triangular(r, &projected, Side::Right, true)?;
    Ok(q.matmul(&coupled).add(&residual))
}

/// Gradient for a wide input (`m < n`); also accepts `m == n`, where the
/// partition has an empty remainder and the result equals
/// [`qr_backward_deep`] bit for bit.
///
/// Needs `A` itself for the `Y V̄ᵀ` coupling term.
pub fn qr_backward_wide(a: &Matrix, f: &QrFactors, g: &QrAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    if m > n {
        return Err(shape_mismatch(
            "qr_backward_wide (needs m <= n)",
            (m, m),
            (m, n),
        ));
    }
    a.expect_dims("qr_backward_wide (input)", m, n)?;
    g.check_conforms(f)?;
    check_leading_block(a)?;

    let p = WideParts::split(a, f, g);
    let q_bar_prime = if p.y.cols() == 0 {
        g.q_bar.clone()
    } else {
        g.q_bar.add(&p.y.matmul_tr(&p.v_bar))
    };
    let x_bar = square_backward(f.q(), &p.u, &q_bar_prime, &p.u_bar)?;
    let y_bar = f.q().matmul(&p.v_bar);
    Ok(x_bar.hcat(&y_bar))
}

pub(crate) const LEADING_COLUMNS_FULL_RANK: &str =
    "the leading m x m column block of a wide input must be full rank";

pub(crate) fn check_leading_block(a: &Matrix) -> Result<()> {
    let condition = leading_block_condition(a, LeadingBlock::QrWide)?;
    if condition.is_finite() && condition * f64::EPSILON * (a.rows() as f64) <= 1.0 {
        Ok(())
    } else {
        Err(Error::AssumptionViolated {
            precondition: LEADING_COLUMNS_FULL_RANK,
            condition,
        })
    }
}

/// Dispatches on shape: [`qr_backward_deep`] for `m >= n`,
/// [`qr_backward_wide`] otherwise.
pub fn qr_backward(a: &Matrix, f: &QrFactors, g: &QrAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    a.expect_dims("qr_backward (input)", m, n)?;
    if m >= n {
        qr_backward_deep(f, g)
    } else {
        qr_backward_wide(a, f, g)
    }
}
