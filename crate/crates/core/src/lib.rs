//! Reduced QR and LQ factorizations of square, deep and wide real matrices,
//! their exact reverse-mode gradients, forward-mode variations, and a
//! central-difference harness that checks every gradient numerically.
//!
//! ```
//! use qrgrad::{qr_reduced, qr_backward, Matrix, QrAdjoints};
//!
//! let a = Matrix::from_rows(&[[2.0, 1.0, 0.5], [1.0, 3.0, -1.0]])?;
//! let f = qr_reduced(&a)?;
//! let g = QrAdjoints::new(Matrix::zeros(2, 2), Matrix::identity(2).hcat(&Matrix::zeros(2, 1)))?;
//! let a_bar = qr_backward(&a, &f, &g)?;
//! assert_eq!(a_bar.dims(), (2, 3));
//! # Ok::<(), qrgrad::Error>(())
//! ```

pub mod error;
pub mod factor;
pub mod gradcheck;
pub mod jvp;
pub mod lq_grad;
pub mod matrix;
pub mod qr_grad;
pub mod random;
pub mod toolkit;
pub mod triangular;

pub use error::{Error, Result};
pub use factor::{
    leading_block_condition, lq_reduced, qr_reduced, LeadingBlock, LqFactors, QrFactors,
};
pub use gradcheck::{
    central_difference, central_difference_grad, run_duality_check, run_equivalence_check,
    run_forward_check, run_gradcheck, GradCheckReport, LossKind, Mode, ScalarLoss,
};
pub use jvp::{
    lq_jvp, lq_jvp_deep, lq_jvp_wide, qr_jvp, qr_jvp_deep, qr_jvp_wide, LqTangent, QrTangent,
    Tangent,
};
pub use lq_grad::{lq_backward, lq_backward_deep, lq_backward_wide, DeepParts, LqAdjoints};
pub use matrix::{Matrix, Order, Shape};
pub use qr_grad::{
    qr_backward, qr_backward_deep, qr_backward_walter, qr_backward_wide, QrAdjoints, WideParts,
};
pub use random::random_matrix;
pub use toolkit::{copyltu, mask_e, sym};
pub use triangular::{solve_lower_triangular, solve_upper_triangular, Side};

// The guide's code listings compile and run as doctests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/toolkit.md")]
    mod toolkit {}
    #[doc = include_str!("../../../book/src/forward.md")]
    mod forward {}
    #[doc = include_str!("../../../book/src/qr_backward.md")]
    mod qr_backward {}
    #[doc = include_str!("../../../book/src/lq_backward.md")]
    mod lq_backward {}
    #[doc = include_str!("../../../book/src/variations.md")]
    mod variations {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
