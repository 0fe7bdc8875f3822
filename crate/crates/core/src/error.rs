use thiserror::Error;

/// Errors raised by models, estimators and the report layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model evaluation failed at n = {index}: rule returned {value}")]
    ModelEvaluation { index: u64, value: f64 },

    #[error("explicit sigma list has {len} entries; index {index} is beyond its end")]
    BeyondExplicitList { index: u64, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tail model error: {0}")]
    TailModel(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("insufficient terms: plan needs {needed} coefficients but the series has {available}")]
    InsufficientTerms { needed: usize, available: usize },

    #[error("no truncation plan: {0}")]
    NoPlan(String),

    #[error("sequence rule returned a non-finite value at n = {index}")]
    NonFiniteSequence { index: u64 },

    #[error("series is not entire (radius of convergence is finite); order and type are undefined")]
    NotEntire,

    #[error("degenerate order: sigma_n = 1 at n = {index}, so |ln sigma_n| vanishes")]
    DegenerateOrder { index: u64 },

    #[error("degenerate series: every coefficient in the window is zero")]
    DegenerateSeries,

    #[error("unreliable estimate: {skipped} of {window} windowed indices were skipped")]
    UnreliableEstimate { skipped: usize, window: usize },

    #[error("grid too small: M_f({r}) = {max_modulus} < 3, ln ln M is not usable")]
    GridTooSmall { r: f64, max_modulus: f64 },

    #[error("inconclusive: quadrature could not certify finiteness or divergence (partial value {partial})")]
    Inconclusive { partial: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by bad configuration or arguments rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
