use proptest::prelude::*;
use qrgrad::factor::diagonal_ratio;
use qrgrad::random::{gaussian, trial_rng};
use qrgrad::{
    leading_block_condition, lq_reduced, qr_reduced, random_matrix, LeadingBlock, Matrix, Shape,
};

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..24, 1usize..24, any::<u64>())
}

/// Modified Gram-Schmidt on the columns of `a`, returning the triangular
/// factor with a positive diagonal. Independent of the Householder code.
#[allow(clippy::needless_range_loop)]
fn gram_schmidt_r(a: &Matrix) -> Matrix {
    let n = a.cols();
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..a.rows()).map(|i| a[(i, j)]).collect())
        .collect();
    let mut r = vec![vec![0.0; n]; n];
    for j in 0..n {
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        r[j][j] = norm;
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
        for k in j + 1..n {
            let (done, rest) = cols.split_at_mut(k);
            let dot: f64 = done[j].iter().zip(&rest[0]).map(|(x, y)| x * y).sum();
            r[j][k] = dot;
            for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                *x -= dot * q;
            }
        }
    }
    Matrix::from_rows(&r).unwrap()
}

proptest! {
    #[test]
    fn qr_is_orthogonal_and_reconstructs((m, n, seed) in dims()) {
        let a = random_matrix(Shape::new(m, n).unwrap(), seed);
        let f = qr_reduced(&a).unwrap();
        prop_assume!(diagonal_ratio(f.r()) <= 1e6);
        let k = m.min(n);
        let q_cols = if m > n { n } else { m };
        prop_assert_eq!(f.q().dims(), (m, q_cols));
        prop_assert_eq!(f.r().dims(), (k, n));
        let orth = f.q().tr_matmul(f.q()).sub(&Matrix::identity(q_cols)).frobenius_norm();
        prop_assert!(orth <= 1e-12 * m as f64, "orthogonality {orth}");
        let recon = f.q().matmul(f.r()).sub(&a).frobenius_norm();
        prop_assert!(recon <= 1e-13 * a.frobenius_norm(), "reconstruction {recon}");
        for i in 0..k {
            prop_assert!(f.r()[(i, i)] >= 0.0);
            for j in 0..i {
                prop_assert_eq!(f.r()[(i, j)].to_bits(), 0.0f64.to_bits());
            }
        }
    }

    #[test]
    fn lq_is_orthogonal_and_reconstructs((m, n, seed) in dims()) {
        let a = random_matrix(Shape::new(m, n).unwrap(), seed);
        let f = lq_reduced(&a).unwrap();
        prop_assume!(diagonal_ratio(f.l()) <= 1e6);
        let orth = f.q().matmul_tr(f.q()).sub(&Matrix::identity(f.q().rows())).frobenius_norm();
        prop_assert!(orth <= 1e-12 * n as f64, "orthogonality {orth}");
        let recon = f.l().matmul(f.q()).sub(&a).frobenius_norm();
        prop_assert!(recon <= 1e-13 * a.frobenius_norm(), "reconstruction {recon}");
        for i in 0..f.l().rows() {
            for j in i + 1..f.l().cols() {
                prop_assert_eq!(f.l()[(i, j)].to_bits(), 0.0f64.to_bits());
            }
        }
    }

    #[test]
    fn lq_is_transposed_qr_of_transpose((m, n, seed) in dims()) {
        let a = random_matrix(Shape::new(m, n).unwrap(), seed);
        let lq = lq_reduced(&a).unwrap();
        let qr = qr_reduced(&a.transpose()).unwrap();
        prop_assert_eq!(lq.l(), &qr.r().transpose());
        prop_assert_eq!(lq.q(), &qr.q().transpose());
    }

    #[test]
    fn factorization_is_deterministic((m, n, seed) in dims()) {
        let shape = Shape::new(m, n).unwrap();
        prop_assert_eq!(random_matrix(shape, seed), random_matrix(shape, seed));
        let a = random_matrix(shape, seed);
        prop_assert_eq!(qr_reduced(&a).unwrap(), qr_reduced(&a).unwrap());
        prop_assert_eq!(lq_reduced(&a).unwrap(), lq_reduced(&a).unwrap());
    }

    #[test]
    fn leading_block_condition_matches_gram_schmidt(m in 1usize..8, extra in 0usize..8, seed in any::<u64>()) {
        let mut rng = trial_rng(seed);
        let wide = gaussian(&mut rng, m, m + extra);
        let block = wide.column_block(0..m);
        let oracle = diagonal_ratio(&gram_schmidt_r(&block));
        prop_assume!(oracle <= 1e6);
        let got = leading_block_condition(&wide, LeadingBlock::QrWide).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-8 * oracle, "{got} vs {oracle}");

        let deep = wide.transpose();
        let got = leading_block_condition(&deep, LeadingBlock::LqDeep).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-8 * oracle, "{got} vs {oracle}");
    }
}

#[test]
fn orthogonality_holds_up_to_128() {
    for (m, n) in [(128, 128), (128, 64), (64, 128), (100, 3), (3, 100)] {
        let a = random_matrix(Shape::new(m, n).unwrap(), 42);
        let f = qr_reduced(&a).unwrap();
        let orth = f
            .q()
            .tr_matmul(f.q())
            .sub(&Matrix::identity(f.q().cols()))
            .frobenius_norm();
        assert!(orth <= 1e-12 * m as f64, "{m}x{n}: {orth}");
        assert!(f.q().matmul(f.r()).sub(&a).frobenius_norm() <= 1e-13 * a.frobenius_norm());
    }
}

#[test]
fn wide_and_square_random_inputs_have_finite_condition() {
    let a = random_matrix(Shape::new(64, 64).unwrap(), 3);
    assert!(diagonal_ratio(qr_reduced(&a).unwrap().r()).is_finite());
    let a = random_matrix("3x6".parse().unwrap(), 5);
    let c = leading_block_condition(&a, LeadingBlock::QrWide).unwrap();
    assert!(c.is_finite() && c >= 1.0);
}
