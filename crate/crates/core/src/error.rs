use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("positivity violation: min h = {min_h:e}")]
    Positivity { min_h: f64 },
    #[error("non-finite state at t = {t}")]
    Blowup { t: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("phase sampling too coarse: {0}")]
    SamplingTooCoarse(String),
    #[error("degenerate circle fit: {0}")]
    DegenerateFit(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("invalid physical setup: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}
