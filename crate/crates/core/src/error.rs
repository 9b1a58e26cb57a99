use thiserror::Error;

pub type Result<T> = std::result::Result<T, SchedError>;

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("gain support must be strictly positive: {0}")]
    NonPositiveSupport(String),

    #[error("E[1/g] diverges for this fading model: {0}")]
    DivergentInverseMoment(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    QuadratureNotConverged { estimate: f64, error_bound: f64 },

    #[error("monomial order must satisfy n > 1, got {0}")]
    InvalidOrder(f64),

    #[error("slot index {t} outside horizon 1..={horizon}")]
    IndexOutOfHorizon { t: usize, horizon: usize },

    #[error("policy/table mismatch: {0}")]
    TableMismatch(String),

    #[error("channel gain must be positive, got {0}")]
    NonPositiveGain(f64),

    #[error("empty horizon")]
    EmptyHorizon,

    #[error("dp grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
