use thiserror::Error;

/// Errors surfaced by the key-rate machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max deviation {deviation:.3e} exceeds {tol:.3e}")]
    NotHermitian { deviation: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is not strictly positive definite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("trace {trace:.6e} outside (0, 1]")]
    TraceOutOfRange { trace: f64 },

    #[error("support violation: overlap with null space is {overlap:.3e}")]
    SupportViolation { overlap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("POVM is not complete: deviation {deviation:.3e}")]
    IncompletePovm { deviation: f64 },

    #[error("projector family invalid: {reason} (deviation {deviation:.3e})")]
    InvalidProjectors {
        reason: &'static str,
        deviation: f64,
    },

    #[error("parameter {name} out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("feasible set is empty or witness violates constraints: {detail}")]
    Infeasible { detail: String },

    #[error("conic solver failed: {status}")]
    SolverFailure { status: String },

    #[error("dual certificate rejected: feasibility residual {residual:.3e}")]
    CertificateRejected { residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
