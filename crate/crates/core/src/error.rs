use thiserror::Error;

/// Errors raised by the analytic and simulation engines.
#[derive(Debug, Error)]
pub enum CbreError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("divergent measure: {0}")]
    DivergentMeasure(String),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("shooting failure: {0}")]
    Shooting(String),
    #[error("bracket violation: f({lo}) = {f_lo}, f({hi}) = {f_hi}, target {target}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },
    #[error("bijectivity failure: {0}")]
    Bijectivity(String),
    #[error("integral divergence: {0}")]
    Divergence(String),
    #[error("ode failure: {0}")]
    Ode(String),
    #[error("simulation: {0}")]
    Simulation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CbreError>;
