//! Reverse-mode gradient of the reduced LQ factorization.
//!
//! Square and wide inputs (`m <= n`, `L` square):
//!
//! ```text
//! M = Lᵀ L̄ − Q̄ Qᵀ
//! Ā = L⁻ᵀ (Q̄ + copyltu(M) Q)
//! ```
//!
//! Deep inputs have a rank-deficient-looking `L` (`m x n`, `m > n`), so the
//! rows are split instead: `A = [X; Y]`, `L = [U; V]`, `L̄ = [Ū; V̄]` with
//! `X = U Q` square and `Y = V Q`. Then
//!
//! ```text
//! Q̄' = Q̄ + V̄ᵀ Y
//! X̄  = U⁻ᵀ (Q̄' + copyltu(Uᵀ Ū − Q̄' Qᵀ) Q)
//! Ȳ  = V̄ Q
//! Ā  = [X̄; Ȳ]
//! ```

use crate::error::{shape_mismatch, Error, Result};
use crate::factor::{leading_block_condition, LeadingBlock, LqFactors};
use crate::matrix::Matrix;
use crate::toolkit::copyltu;
use crate::triangular::{solve_lower_triangular, Side};

/// Upstream adjoints of the LQ factors: `L̄` (`m x k`) and `Q̄` (`k x n`).
#[derive(Debug, Clone, PartialEq)]
pub struct LqAdjoints {
    l_bar: Matrix,
    q_bar: Matrix,
}

impl LqAdjoints {
    pub fn new(l_bar: Matrix, q_bar: Matrix) -> Result<Self> {
        if !l_bar.is_finite() || !q_bar.is_finite() {
            return Err(Error::InvalidInput("adjoints must be finite".into()));
        }
        Ok(LqAdjoints { l_bar, q_bar })
    }

    pub fn zeros(f: &LqFactors) -> Self {
        LqAdjoints {
            l_bar: Matrix::zeros(f.l().rows(), f.l().cols()),
            q_bar: Matrix::zeros(f.q().rows(), f.q().cols()),
        }
    }

    pub fn l_bar(&self) -> &Matrix {
        &self.l_bar
    }

    pub fn q_bar(&self) -> &Matrix {
        &self.q_bar
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &LqAdjoints, beta: f64) -> LqAdjoints {
        LqAdjoints {
            l_bar: self.l_bar.scale(alpha).add(&other.l_bar.scale(beta)),
            q_bar: self.q_bar.scale(alpha).add(&other.q_bar.scale(beta)),
        }
    }

    fn check_conforms(&self, f: &LqFactors) -> Result<()> {
        self.l_bar
            .expect_dims("LQ backward (L adjoint)", f.l().rows(), f.l().cols())?;
        self.q_bar
            .expect_dims("LQ backward (Q adjoint)", f.q().rows(), f.q().cols())
    }
}

/// Row split of a deep problem into its top square block and the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepParts {
    pub x: Matrix,
    pub y: Matrix,
    pub u: Matrix,
    pub v: Matrix,
    pub u_bar: Matrix,
    pub v_bar: Matrix,
}

impl DeepParts {
    /// Splits `A`, `L` and `L̄` after their first `n` rows.
    pub fn split(a: &Matrix, f: &LqFactors, g: &LqAdjoints) -> Self {
        let (m, n) = a.dims();
        DeepParts {
            x: a.row_block(0..n),
            y: a.row_block(n..m),
            u: f.l().row_block(0..n),
            v: f.l().row_block(n..m),
            u_bar: g.l_bar.row_block(0..n),
            v_bar: g.l_bar.row_block(n..m),
        }
    }
}

/// `L⁻ᵀ (Q̄ + copyltu(Lᵀ L̄ − Q̄ Qᵀ) Q)` for square lower triangular `l`.
fn square_backward(l: &Matrix, q: &Matrix, l_bar: &Matrix, q_bar: &Matrix) -> Result<Matrix> {
    let m = l.tr_matmul(l_bar).sub(&q_bar.matmul_tr(q));
    let rhs = q_bar.add(&copyltu(&m)?.matmul(q));
    solve_lower_triangular(l, &rhs, Side::Left, true)
}

fn forward_dims(f: &LqFactors) -> (usize, usize) {
    (f.shape().m, f.shape().n)
}

/// Gradient for a square or wide input (`m <= n`).
pub fn lq_backward_wide(f: &LqFactors, g: &LqAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    if m > n {
        return Err(shape_mismatch(
            "lq_backward_wide (needs m <= n)",
            (m, m),
            (m, n),
        ));
    }
    g.check_conforms(f)?;
    square_backward(f.l(), f.q(), &g.l_bar, &g.q_bar)
}

/// Gradient for a deep input (`m > n`) by row partitioning; `m == n` is
/// accepted and reproduces [`lq_backward_wide`] exactly.
pub fn lq_backward_deep(a: &Matrix, f: &LqFactors, g: &LqAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    if m < n {
        return Err(shape_mismatch(
            "lq_backward_deep (needs m >= n)",
            (n, n),
            (m, n),
        ));
    }
    a.expect_dims("lq_backward_deep (input)", m, n)?;
    g.check_conforms(f)?;
    check_leading_block(a)?;

    let p = DeepParts::split(a, f, g);
    let q_bar_prime = if p.y.rows() == 0 {
        g.q_bar.clone()
    } else {
        g.q_bar.add(&p.v_bar.tr_matmul(&p.y))
    };
    let x_bar = square_backward(&p.u, f.q(), &p.u_bar, &q_bar_prime)?;
    let y_bar = p.v_bar.matmul(f.q());
    Ok(x_bar.vcat(&y_bar))
}

pub(crate) const LEADING_ROWS_FULL_RANK: &str =
    "the top n x n row block of a deep input must be full rank";

pub(crate) fn check_leading_block(a: &Matrix) -> Result<()> {
    let condition = leading_block_condition(a, LeadingBlock::LqDeep)?;
    if condition.is_finite() && condition * f64::EPSILON * (a.cols() as f64) <= 1.0 {
        Ok(())
    } else {
        Err(Error::AssumptionViolated {
            precondition: LEADING_ROWS_FULL_RANK,
            condition,
        })
    }
}

/// Dispatches on shape: [`lq_backward_wide`] for `m <= n`,
/// [`lq_backward_deep`] otherwise.
pub fn lq_backward(a: &Matrix, f: &LqFactors, g: &LqAdjoints) -> Result<Matrix> {
    let (m, n) = forward_dims(f);
    a.expect_dims("lq_backward (input)", m, n)?;
    if m <= n {
        lq_backward_wide(f, g)
    } else {
        lq_backward_deep(a, f, g)
    }
}
