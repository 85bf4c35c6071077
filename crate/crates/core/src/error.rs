use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("profile is not normalized: measured average {average}")]
    NotNormalized { average: f64 },

    #[error("step profile is not well distributed (C_j * eps_j must equal 1/N)")]
    NotWellDistributed,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("positivity lost at t = {t}: {detail}")]
    PositivityLost { t: f64, detail: String },

    #[error("extremum scan disagrees under refinement ({coarse} vs {fine}); use a finer grid")]
    GridTooCoarse { coarse: f64, fine: f64 },

    #[error("instance generator failed after {0} retries")]
    GeneratorExhausted(usize),

    #[error("parse error in {field}: {message}")]
    Parse { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
