//! Triangular solves by substitution. No inverse is ever formed.

use crate::error::{shape_mismatch, Error, Result};
use crate::matrix::Matrix;

/// Which side the triangular factor multiplies the unknown from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(T) · X = B`.
    Left,
    /// Solve `X · op(T) = B`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Triangle {
    Upper,
    Lower,
}

/// Index of the first diagonal entry that fails the rank test
/// `|t_ii| < ε · n · max_j |t_jj|`, if any.
pub fn negligible_diagonal(t: &Matrix) -> Option<usize> {
    let n = t.rows().min(t.cols());
    let max = (0..n).fold(0.0_f64, |acc, i| acc.max(t[(i, i)].abs()));
    let threshold = f64::EPSILON * n as f64 * max;
    (0..n).find(|&i| {
        let d = t[(i, i)].abs();
        d == 0.0 || d < threshold
    })
}

/// Solves with an upper triangular `r`; entries below its diagonal are ignored.
///
/// With `transpose` set the system uses `rᵀ` in place of `r`, so
/// `Side::Right, transpose = true` yields `B · r⁻ᵀ`.
pub fn solve_upper_triangular(
    r: &Matrix,
    b: &Matrix,
    side: Side,
    transpose: bool,
) -> Result<Matrix> {
    solve(r, Triangle::Upper, b, side, transpose)
}

/// Lower triangular counterpart of [`solve_upper_triangular`]; entries above
/// the diagonal are ignored.
pub fn solve_lower_triangular(
    l: &Matrix,
    b: &Matrix,
    side: Side,
    transpose: bool,
) -> Result<Matrix> {
    solve(l, Triangle::Lower, b, side, transpose)
}

fn solve(t: &Matrix, tri: Triangle, b: &Matrix, side: Side, transpose: bool) -> Result<Matrix> {
    if !t.is_square() {
        return Err(Error::ShapeMismatch {
            op: "triangular solve",
            expected: "square triangular factor".into(),
            found: format!("{}x{}", t.rows(), t.cols()),
        });
    }
    let n = t.rows();
    match side {
        Side::Left if b.rows() != n => {
            return Err(shape_mismatch(
                "triangular solve (left)",
                (n, b.cols()),
                b.dims(),
            ))
        }
        Side::Right if b.cols() != n => {
            return Err(shape_mismatch(
                "triangular solve (right)",
                (b.rows(), n),
                b.dims(),
            ))
        }
        _ => {}
    }
    if let Some(index) = negligible_diagonal(t) {
        return Err(Error::Singular { index });
    }

    // Triangle of op(T).
    let effective = match (tri, transpose) {
        (Triangle::Upper, false) | (Triangle::Lower, true) => Triangle::Upper,
        _ => Triangle::Lower,
    };
    match side {
        Side::Left => Ok(substitute(t, transpose, effective, b.clone())),
        Side::Right => {
            // X op(T) = B  <=>  op(T)ᵀ Xᵀ = Bᵀ
            let flipped = match effective {
                Triangle::Upper => Triangle::Lower,
                Triangle::Lower => Triangle::Upper,
            };
            Ok(substitute(t, !transpose, flipped, b.transpose()).transpose())
        }
    }
}

/// Overwrites `x` (holding the right-hand side) with the solution of
/// `op(T) X = B`, where `op(T)` is `T` or `Tᵀ` and is `effective` triangular.
fn substitute(t: &Matrix, transpose: bool, effective: Triangle, mut x: Matrix) -> Matrix {
    let n = t.rows();
    let p = x.cols();
    let at = |i: usize, j: usize| if transpose { t[(j, i)] } else { t[(i, j)] };
    let order: Box<dyn Iterator<Item = usize>> = match effective {
        Triangle::Lower => Box::new(0..n),
        Triangle::Upper => Box::new((0..n).rev()),
    };
    let mut acc = vec![0.0; p];
    for i in order {
        acc.copy_from_slice(x.row(i));
        let solved = match effective {
            Triangle::Lower => 0..i,
            Triangle::Upper => i + 1..n,
        };
        for j in solved {
            let c = at(i, j);
            if c == 0.0 {
                continue;
            }
            for (a, &xj) in acc.iter_mut().zip(x.row(j)) {
                *a -= c * xj;
            }
        }
        let d = at(i, i);
        for (dst, a) in x.row_mut(i).iter_mut().zip(&acc) {
            *dst = a / d;
        }
    }
    x
}
