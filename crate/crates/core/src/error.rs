use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("step size underflow at t = {last_good_t}")]
    StepUnderflow { last_good_t: f64 },

    #[error("step budget of {max_steps} exhausted at t = {last_good_t}")]
    StepBudget { max_steps: usize, last_good_t: f64 },

    #[error("state left the action domain at t = {exit_t}")]
    DomainExit { exit_t: f64 },

    #[error("lattice is not saturated: elementary divisor {divisor}")]
    Unsaturated { divisor: i64 },

    #[error("zero small divisor omega.nu at nu = {nu:?} outside the resonant set")]
    ZeroSmallDivisor { nu: Vec<i64> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("constraint stack rank-deficient after {samples} samples")]
    RankDeficient { samples: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input
    /// or violated preconditions).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. }
                | Error::StepBudget { .. }
                | Error::DomainExit { .. }
                | Error::ZeroSmallDivisor { .. }
                | Error::RankDeficient { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
