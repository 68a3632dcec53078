use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite element at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    /// A zero pivot was met during elimination without row interchanges.
    #[error("singular pivot at k={index} (|u_kk| = {value:e})")]
    SingularPivot { index: usize, value: f64 },

    /// The whole pivot column below the diagonal is zero.
    #[error("matrix is singular: no usable pivot in column {index}")]
    Singular { index: usize },

    #[error(
        "near-singular A block: |R[{index},{index}]| <= {threshold:e} (smallest |R_ii| = {r_diag_min_abs:e})"
    )]
    NearSingular {
        index: usize,
        r_diag_min_abs: f64,
        threshold: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("unsupported routine: {0}")]
    Unsupported(String),

    /// Simulated results disagree with the reference kernels.
    #[error("functional mismatch: {0}")]
    Mismatch(String),

    #[error("dependence violation: {0}")]
    Dependence(String),

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },

    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Numerical failures (singular or near-singular systems) as opposed to
    /// bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularPivot { .. } | Error::Singular { .. } | Error::NearSingular { .. } => {
                true
            }
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
