//! Reduced QR and LQ factorizations by Householder reflections.
//!
//! Both factorizations use the nonnegative-diagonal convention: after the
//! Householder sweep every row of `R` with a negative diagonal entry is
//! negated together with the matching column of `Q`. The factors are then a
//! unique, smooth function of a full-rank input, which is what lets central
//! differences validate their derivatives.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Shape};
use crate::triangular::negligible_diagonal;

/// `A = Q R` with `Q` of size `m x k` (orthonormal columns) and `R` of size
/// `k x n` (upper triangular), `k = min(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    q: Matrix,
    r: Matrix,
    shape: Shape,
}

impl QrFactors {
    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.q, self.r)
    }
}

/// `A = L Q` with `L` of size `m x k` (lower triangular) and `Q` of size
/// `k x n` (orthonormal rows).
#[derive(Debug, Clone, PartialEq)]
pub struct LqFactors {
    l: Matrix,
    q: Matrix,
    shape: Shape,
}

impl LqFactors {
    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.l, self.q)
    }
}

/// Reduced QR factorization.
///
/// For a deep input `Q` is `m x n` and `R` is `n x n`; for a wide input `Q`
/// is the full `m x m` orthogonal matrix and `R` is `m x n`. Fails with
/// [`Error::RankDeficient`] when a diagonal entry of `R` is negligible, which
/// for wide inputs includes a singular leading `m x m` block (there is no
/// column pivoting).
pub fn qr_reduced(a: &Matrix) -> Result<QrFactors> {
    let shape = Shape::new(a.rows(), a.cols())?;
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (q, r) = householder(a, true);
    if let Some(index) = negligible_diagonal(&r) {
        return Err(Error::RankDeficient { index });
    }
    Ok(QrFactors {
        q: q.expect("Q requested"),
        r,
        shape,
    })
}

/// Reduced LQ factorization, computed as the transpose of the QR
/// factorization of `Aᵀ`.
pub fn lq_reduced(a: &Matrix) -> Result<LqFactors> {
    let shape = Shape::new(a.rows(), a.cols())?;
    let (q, r) = qr_reduced(&a.transpose())?.into_parts();
    Ok(LqFactors {
        l: r.transpose(),
        q: q.transpose(),
        shape,
    })
}

/// Which leading square block [`leading_block_condition`] inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeadingBlock {
    /// First `m` columns of a wide (or square) matrix.
    QrWide,
    /// First `n` rows of a deep (or square) matrix.
    LqDeep,
}

/// Condition estimate `max|u_ii| / min|u_ii|` of the leading `k x k` block,
/// read off the diagonal of the block's own triangular factor.
///
/// An exactly singular block yields `f64::INFINITY`.
pub fn leading_block_condition(a: &Matrix, mode: LeadingBlock) -> Result<f64> {
    let (m, n) = a.dims();
    let block = match mode {
        LeadingBlock::QrWide if m <= n && m > 0 => a.column_block(0..m),
        // LQ of the block is the transposed QR of its transpose.
        LeadingBlock::LqDeep if m >= n && n > 0 => a.row_block(0..n).transpose(),
        _ => {
            return Err(Error::ShapeMismatch {
                op: "leading_block_condition",
                expected: match mode {
                    LeadingBlock::QrWide => "wide or square matrix".into(),
                    LeadingBlock::LqDeep => "deep or square matrix".into(),
                },
                found: format!("{m}x{n}"),
            })
        }
    };
    if !block.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (_, r) = householder(&block, false);
    Ok(diagonal_ratio(&r))
}

/// `max|t_ii| / min|t_ii|` over the diagonal, infinite if some entry is zero.
pub fn diagonal_ratio(t: &Matrix) -> f64 {
    let k = t.rows().min(t.cols());
    let (lo, hi) = (0..k).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
        let d = t[(i, i)].abs();
        (lo.min(d), hi.max(d))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Householder sweep with the sign fix applied. Returns `(Q, R)`; `Q` is only
/// accumulated when requested. `R` has exact zeros below its diagonal.
fn householder(a: &Matrix, want_q: bool) -> (Option<Matrix>, Matrix) {
    let (m, n) = a.dims();
    let k = m.min(n);
    let mut work = a.clone();
    let mut taus = vec![0.0; k];

    for j in 0..k {
        let alpha = work[(j, j)];
        let tail_sq: f64 = (j + 1..m).map(|i| work[(i, j)] * work[(i, j)]).sum();
        if tail_sq == 0.0 {
            // Column is already reduced; H_j = I.
            continue;
        }
        let norm = (alpha * alpha + tail_sq).sqrt();
        let beta = if alpha >= 0.0 { -norm } else { norm };
        let tau = (beta - alpha) / beta;
        let scale = 1.0 / (alpha - beta);
        for i in j + 1..m {
            *work.get_mut(i, j) *= scale;
        }
        work.set(j, j, beta);
        taus[j] = tau;

        // Apply H_j = I - tau v vᵀ (v_j = 1) to the trailing columns.
        for c in j + 1..n {
            let mut dot = work[(j, c)];
            for i in j + 1..m {
                dot += work[(i, j)] * work[(i, c)];
            }
            let f = tau * dot;
            *work.get_mut(j, c) -= f;
            for i in j + 1..m {
                let vi = work[(i, j)];
                *work.get_mut(i, c) -= f * vi;
            }
        }
    }

    let mut r = Matrix::from_fn(k, n, |i, c| if c >= i { work[(i, c)] } else { 0.0 });

    let mut q = want_q.then(|| {
        // Q = H_0 H_1 ... H_{k-1} I[:, :k], accumulated back to front.
        let mut q = Matrix::from_fn(m, k, |i, c| if i == c { 1.0 } else { 0.0 });
        for j in (0..k).rev() {
            let tau = taus[j];
            if tau == 0.0 {
                continue;
            }
            for c in j..k {
                let mut dot = q[(j, c)];
                for i in j + 1..m {
                    dot += work[(i, j)] * q[(i, c)];
                }
                let f = tau * dot;
                *q.get_mut(j, c) -= f;
                for i in j + 1..m {
                    let vi = work[(i, j)];
                    *q.get_mut(i, c) -= f * vi;
                }
            }
        }
        q
    });

    for i in 0..k {
        if r[(i, i)] < 0.0 {
            for v in &mut r.row_mut(i)[i..] {
                *v = -*v;
            }
            if let Some(q) = q.as_mut() {
                for row in 0..m {
                    *q.get_mut(row, i) = -q[(row, i)];
                }
            }
        }
    }
    (q, r)
}
