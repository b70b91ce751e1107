use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: only 1 and 2 are supported")]
    UnsupportedDimension(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field shape mismatch: {0}")]
    Shape(String),
    #[error("coefficient field is not elliptic: {0}")]
    NotElliptic(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("invalid scenario parameters: {0}")]
    InvalidParameters(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("dense computation requested on {cells} cells (limit {limit})")]
    TooLarge { cells: usize, limit: usize },
    #[error("invalid time arguments: {0}")]
    InvalidTime(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
