use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {reason}")]
    ParameterDomain { name: String, reason: String },

    #[error("singular system matrix (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("integration diverged at t = {time:.9} s")]
    Integration { time: f64 },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("time series invariant violated: {0}")]
    Series(String),

    #[error("misaligned signals: {left} samples vs {right} samples")]
    Alignment { left: usize, right: usize },

    #[error("ill-conditioned regression (singular values {singular_values:?})")]
    Conditioning { singular_values: Vec<f64> },

    #[error(
        "anti-windup regressor is identically zero; re-run data collection so the \
         duty command leaves the saturation band"
    )]
    Excitation,

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("no grid gain produced a sustained oscillation ({} gains tried)", trace.len())]
    SearchFailure {
        trace: Vec<crate::tuning::GainProbe>,
    },

    #[error("non-finite signal value: {0}")]
    Signal(String),

    #[error("{path}:{line}: {reason}")]
    Config {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("missing artifact {path}; run the `{recipe}` recipe first")]
    Dependency { recipe: String, path: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ParameterDomain { .. } | Error::Domain(_) => "domain",
            Error::Singular { .. } => "singular",
            Error::Integration { .. } => "integration",
            Error::UnknownChannel(_) | Error::Series(_) => "series",
            Error::Alignment { .. } => "alignment",
            Error::Conditioning { .. } => "conditioning",
            Error::Excitation => "excitation",
            Error::Degenerate(_) => "degenerate",
            Error::SearchFailure { .. } => "search_failure",
            Error::Signal(_) => "signal",
            Error::Config { .. } => "config",
            Error::Dependency { .. } => "dependency",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &str, reason: impl Into<String>) -> Error {
    Error::ParameterDomain {
        name: name.to_string(),
        reason: reason.into(),
    }
}
