use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("pole degeneracy at phi = {0}")]
    PoleDegeneracy(f64),
    #[error("metric is singular at the vertex")]
    VertexSingularity,
    #[error("integration range reaches the south pole (phi_max = {0})")]
    PoleCollision(f64),
    #[error("no convergence: {0}")]
    ConvergenceFailure(String),
    #[error("profile has no zero on (0, {0})")]
    NoZero(f64),
    #[error("property violated: {0}")]
    PropertyViolation(String),
    #[error("bracket ({lo}, {hi}) does not straddle a sign change of the margin")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("invalid test function: {0}")]
    InvalidTestFunction(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("zero set is empty in the sampled range")]
    EmptyZeroSet,
}

impl Error {
    /// True for failures of an iterative or numerical process, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::ConvergenceFailure(_) | Error::NoZero(_) | Error::PropertyViolation(_))
    }
}

pub(crate) fn check_c(c: f64) -> Result<()> {
    if !c.is_finite() || c < 0.0 {
        return Err(Error::InvalidParameter(format!("cone slope c must be finite and >= 0, got {c}")));
    }
    Ok(())
}
