use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("CFL violation: advective CFL = {cfl:.4} exceeds 1")]
    CflViolation { cfl: f64 },

    #[error("elliptic solver failed to converge after {iters} iterations, relative residual {residual:.3e}")]
    SolverDiverged { iters: usize, residual: f64 },

    #[error("regime conversion failed: {0}")]
    Conversion(String),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
