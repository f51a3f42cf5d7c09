use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },

    #[error("quadrature did not reach tolerance within {depth} subdivisions on [{lo}, {hi}]")]
    NoConvergence { lo: f64, hi: f64, depth: usize },

    #[error("bad bracket: lo = {lo} must be below hi = {hi}")]
    BadBracket { lo: f64, hi: f64 },

    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),

    #[error("gain must be finite and strictly positive, got {0}")]
    InvalidGain(f64),

    #[error("noise variance must be finite and strictly positive, got {0}")]
    InvalidNoiseVariance(f64),

    #[error("invalid input distribution: {0}")]
    InvalidPrior(String),

    #[error("input distribution has mean {mean}, a zero-mean input is required")]
    NotZeroMean { mean: f64 },

    #[error("input distribution has zero variance")]
    DegeneratePrior,

    #[error("output Fisher information {0:e} is too small")]
    DegenerateFisher(f64),

    #[error("sample second moment does not exceed the noise variance; moment estimate clamps to {clamped}")]
    DegenerateSample { clamped: f64 },

    #[error("likelihood maximum at bracket boundary a = {at} (bracket [{lo}, {hi}])")]
    MinimumAtBoundary { at: f64, lo: f64, hi: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration:\n{}", format_fields(.0))]
    ConfigInvalid(Vec<FieldError>),

    #[error("i/o error: {0}")]
    Io(String),
}

/// One field-level configuration diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn format_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(|f| format!("  {}: {}", f.field, f.message))
        .collect::<Vec<_>>()
        .join("\n")
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
