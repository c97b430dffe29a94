use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("subsystem index {index} out of range for {count} factors")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("matrix is not Hermitian (max |M - M^dagger| = {gap:e})")]
    NotHermitian { gap: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("state is not normalized (norm^2 = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    #[error("cloner coefficients violate normalization (value {value}, expected 1)")]
    CoefficientsNotNormalized { value: f64 },

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("infeasible tradeoff query: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}
