use thiserror::Error;

/// Errors produced by the simulation and numerics modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("geometry inconsistency: {0}")]
    Geometry(String),

    #[error("no k in [{k_min}, {k_max}] exceeds threshold {threshold}; best seen k={best_k} a={best_a:.4} P={best_p:.6}")]
    NotFound {
        threshold: f64,
        k_min: u32,
        k_max: u32,
        best_k: u32,
        best_a: f64,
        best_p: f64,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
