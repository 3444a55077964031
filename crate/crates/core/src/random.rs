use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{Matrix, Shape};

/// Seeded generator used for every random trial input.
pub type TrialRng = ChaCha8Rng;

pub fn trial_rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `m x n` matrix of i.i.d. standard normal entries, bit-identical for a
/// given `(shape, seed)`.
pub fn random_matrix(shape: Shape, seed: u64) -> Matrix {
    gaussian(&mut trial_rng(seed), shape.m, shape.n)
}

/// Draws a `rows x cols` standard normal matrix from an existing stream.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::from_raw(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let s = Shape::new(2, 2).unwrap();
        assert_eq!(random_matrix(s, 42), random_matrix(s, 42));
        assert_ne!(random_matrix(s, 42), random_matrix(s, 43));
    }

    #[test]
    fn has_requested_shape() {
        let a = random_matrix(Shape::new(3, 5).unwrap(), 7);
        assert_eq!(a.dims(), (3, 5));
        assert!(a.is_finite());
    }
}
