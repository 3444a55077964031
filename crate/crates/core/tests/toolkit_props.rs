use proptest::prelude::*;
use qrgrad::random::{gaussian, trial_rng};
use qrgrad::toolkit::{frobenius_inner, trace_of_product};
use qrgrad::{
    copyltu, mask_e, qr_reduced, solve_lower_triangular, solve_upper_triangular, sym, Matrix, Side,
};

fn square(n: usize, seed: u64) -> Matrix {
    gaussian(&mut trial_rng(seed), n, n)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn lower_part(a: &Matrix) -> Matrix {
    Matrix::from_fn(
        a.rows(),
        a.cols(),
        |i, j| if i >= j { a[(i, j)] } else { 0.0 },
    )
}

proptest! {
    #[test]
    fn copyltu_is_symmetric_and_idempotent(n in 1usize..10, seed in any::<u64>()) {
        let a = square(n, seed);
        let c = copyltu(&a).unwrap();
        prop_assert_eq!(&c, &c.transpose());
        prop_assert_eq!(&copyltu(&c).unwrap(), &c);
    }

    #[test]
    fn copyltu_equals_sym_of_lower_mask(n in 1usize..10, seed in any::<u64>()) {
        let a = square(n, seed);
        let e = mask_e(n).unwrap();
        prop_assert_eq!(copyltu(&a).unwrap(), sym(&a.hadamard(&e)).unwrap());
    }

    #[test]
    fn mask_recovers_triangular_matrices(n in 1usize..10, seed in any::<u64>()) {
        let e = mask_e(n).unwrap();
        let lower = lower_part(&square(n, seed));
        prop_assert_eq!(&sym(&lower).unwrap().hadamard(&e), &lower);
        let upper = lower.transpose();
        prop_assert_eq!(&sym(&upper).unwrap().hadamard(&e.transpose()), &upper);
    }

    #[test]
    fn masked_symmetric_pairing_identity(n in 1usize..10, seed in any::<u64>()) {
        // Tr(Mᵀ (sym(C) ∘ E)) = Tr(sym(M ∘ E) C): moving the symmetrised mask
        // from one side of the pairing to the other.
        let mut rng = trial_rng(seed);
        let m = gaussian(&mut rng, n, n);
        let c = gaussian(&mut rng, n, n);
        let e = mask_e(n).unwrap();
        let lhs = frobenius_inner(&m, &sym(&c).unwrap().hadamard(&e));
        let rhs = trace_of_product(&sym(&m.hadamard(&e)).unwrap(), &c);
        prop_assert!(rel(lhs, rhs) <= 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn trace_is_cyclic_and_transpose_invariant(
        m in 1usize..7, n in 1usize..7, p in 1usize..7, seed in any::<u64>()
    ) {
        let mut rng = trial_rng(seed);
        let a = gaussian(&mut rng, m, n);
        let b = gaussian(&mut rng, n, p);
        let c = gaussian(&mut rng, p, m);
        let abc = a.matmul(&b).matmul(&c).trace();
        let cab = c.matmul(&a).matmul(&b).trace();
        let bca = b.matmul(&c).matmul(&a).trace();
        prop_assert!(rel(abc, cab) <= 1e-12 || (abc - cab).abs() <= 1e-12);
        prop_assert!(rel(abc, bca) <= 1e-12 || (abc - bca).abs() <= 1e-12);
        let sq = gaussian(&mut rng, m, m);
        prop_assert_eq!(sq.trace(), sq.transpose().trace());
        prop_assert!(rel(trace_of_product(&a, &a.transpose()), a.matmul(&a.transpose()).trace()) <= 1e-12);
    }

    #[test]
    fn triangular_solves_recover_the_right_hand_side(
        n in 1usize..10, cols in 1usize..5, seed in any::<u64>(), transpose in any::<bool>()
    ) {
        let mut rng = trial_rng(seed);
        let r = qr_reduced(&gaussian(&mut rng, n, n)).unwrap().into_parts().1;
        prop_assume!(qrgrad::factor::diagonal_ratio(&r) <= 1e6);
        let l = r.transpose();
        let left = gaussian(&mut rng, n, cols);
        let right = gaussian(&mut rng, cols, n);
        let op = |t: &Matrix| if transpose { t.transpose() } else { t.clone() };

        let x = solve_upper_triangular(&r, &left, Side::Left, transpose).unwrap();
        prop_assert!(op(&r).matmul(&x).sub(&left).frobenius_norm() <= 1e-12 * left.frobenius_norm());
        let x = solve_upper_triangular(&r, &right, Side::Right, transpose).unwrap();
        prop_assert!(x.matmul(&op(&r)).sub(&right).frobenius_norm() <= 1e-12 * right.frobenius_norm());
        let x = solve_lower_triangular(&l, &left, Side::Left, transpose).unwrap();
        prop_assert!(op(&l).matmul(&x).sub(&left).frobenius_norm() <= 1e-12 * left.frobenius_norm());
        let x = solve_lower_triangular(&l, &right, Side::Right, transpose).unwrap();
        prop_assert!(x.matmul(&op(&l)).sub(&right).frobenius_norm() <= 1e-12 * right.frobenius_norm());
    }
}
