use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical blow-up at step {step}: {detail}")]
    Blowup { step: usize, detail: String },

    #[error("support too large: {atoms} atoms exceeds the limit of {limit}; subsample first")]
    SupportTooLarge { atoms: usize, limit: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("singular map: {0}")]
    SingularMap(String),

    #[error("pathological density: rejection sampler exceeded {0} proposals")]
    RejectionCap(usize),

    #[error("stabiliser domain violated: distance {distance} exceeds delta {delta}")]
    StabiliserDomain { distance: f64, delta: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("grid cannot resolve the requested feature: {detail} (need n >= {min_n})")]
    Resolution { detail: String, min_n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
