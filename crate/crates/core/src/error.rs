use thiserror::Error;

/// Errors raised by the factorizations, their gradients and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch in {op}: expected {expected}, found {found}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("triangular matrix is singular at diagonal index {index}")]
    Singular { index: usize },

    #[error(
        "matrix is rank deficient: diagonal entry {index} of the triangular factor is negligible"
    )]
    RankDeficient { index: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A partitioned gradient or variation needs a full-rank leading block.
    #[error(
        "assumption violated: {precondition} (leading block condition estimate {condition:e})"
    )]
    AssumptionViolated {
        precondition: &'static str,
        condition: f64,
    },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("loss evaluation failed at perturbed entry ({row}, {col}): {source}")]
    PerturbationFailure {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("could not generate a usable random trial after {attempts} attempts")]
    GenerationFailure { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_mismatch(
    op: &'static str,
    expected: (usize, usize),
    found: (usize, usize),
) -> Error {
    Error::ShapeMismatch {
        op,
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}
