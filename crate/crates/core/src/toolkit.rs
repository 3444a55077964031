//! Masks, symmetrization and trace helpers used by the gradient formulas.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn require_square(op: &'static str, a: &Matrix) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            expected: "square matrix".into(),
            found: format!("{}x{}", a.rows(), a.cols()),
        })
    }
}

/// The masking matrix `E`: `0` above the diagonal, `1` on it, `2` below.
///
/// A lower triangular `A` satisfies `A = sym(A) ∘ E`, an upper triangular one
/// `A = sym(A) ∘ Eᵀ`.
pub fn mask_e(n: usize) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "masking matrix needs n >= 1".into(),
        ));
    }
    Ok(Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => 2.0,
    }))
}

/// All-ones strictly below the diagonal, zero elsewhere.
pub fn strict_lower_ones(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i > j { 1.0 } else { 0.0 })
}

/// `(A + Aᵀ) / 2`.
pub fn sym(a: &Matrix) -> Result<Matrix> {
    require_square("sym", a)?;
    Ok(Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        (a[(i, j)] + a[(j, i)]) / 2.0
    }))
}

/// Copies the lower triangle (diagonal included) onto the upper triangle.
///
/// Equal, bit for bit, to `sym(A ∘ E)`.
pub fn copyltu(a: &Matrix) -> Result<Matrix> {
    require_square("copyltu", a)?;
    Ok(Matrix::from_fn(a.rows(), a.cols(), |i, j| {
        if i >= j {
            a[(i, j)]
        } else {
            a[(j, i)]
        }
    }))
}

/// `sym(A) ∘ Eᵀ` computed entrywise: the upper triangular matrix whose strict
/// upper part is `a_ij + a_ji` and whose diagonal is `a_ii`.
pub(crate) fn sym_mask_upper(a: &Matrix) -> Matrix {
    debug_assert!(a.is_square());
    Matrix::from_fn(a.rows(), a.cols(), |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => a[(i, j)] + a[(j, i)],
        std::cmp::Ordering::Equal => a[(i, i)],
        std::cmp::Ordering::Greater => 0.0,
    })
}

/// `sym(A) ∘ E`, the lower triangular counterpart of [`sym_mask_upper`].
pub(crate) fn sym_mask_lower(a: &Matrix) -> Matrix {
    debug_assert!(a.is_square());
    Matrix::from_fn(a.rows(), a.cols(), |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => a[(i, j)] + a[(j, i)],
        std::cmp::Ordering::Equal => a[(i, i)],
        std::cmp::Ordering::Less => 0.0,
    })
}

/// `Tr(Aᵀ B)`, the Frobenius inner product, without forming the product.
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.dims(), b.dims(), "frobenius_inner: dimension mismatch");
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .sum()
}

/// `Tr(A B)` in O(mn) without forming `A B`.
pub fn trace_of_product(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(
        (a.rows(), a.cols()),
        (b.cols(), b.rows()),
        "trace_of_product: dimension mismatch"
    );
    let mut acc = 0.0;
    for i in 0..a.rows() {
        for (j, &v) in a.row(i).iter().enumerate() {
            acc += v * b[(j, i)];
        }
    }
    acc
}

/// `‖A + Aᵀ‖_F`, zero exactly when `A` is skew-symmetric.
pub fn skew_residual(a: &Matrix) -> f64 {
    debug_assert!(a.is_square());
    a.add(&a.transpose()).frobenius_norm()
}
