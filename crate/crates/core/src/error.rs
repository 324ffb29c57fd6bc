use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{0} is outside the domain")]
    OutOfDomain(String),

    #[error("non-finite gradient in parameter block {block} at index {index} (value {value})")]
    NonFiniteGradient { block: usize, index: usize, value: f64 },

    #[error("Cholesky factorization failed with jitter up to {max_jitter:e}: {detail}")]
    Factorization { max_jitter: f64, detail: String },

    #[error("all {0} trajectories diverged; no records produced")]
    AllDiverged(usize),

    #[error(
        "training diverged at iteration {iteration} (loss {loss}); \
         model restored to iteration {last_good_iteration}"
    )]
    TrainingDiverged {
        iteration: usize,
        loss: f64,
        last_good_iteration: usize,
    },

    #[error("bad container: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
