use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("invalid measurement configuration: {0}")]
    Measurement(String),

    #[error("invalid histogram: {0}")]
    Histogram(String),

    #[error("binned profile is identically zero and cannot be normalized")]
    DegenerateProfile,

    #[error("mixture components must differ only in delta_nu: {0}")]
    MixtureDomain(String),

    #[error("cannot embed series: {0}")]
    Embedding(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("invalid component selection: {0}")]
    Selection(String),

    #[error("no oscillatory content in the selected components")]
    NoOscillatoryContent,

    #[error("spectral peak sits at the Nyquist band edge ({frequency_hz:.3e} Hz)")]
    PeakAtBandEdge { frequency_hz: f64 },

    #[error("invalid study configuration: {0}")]
    Study(String),

    #[error("I/O error")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Format(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Estimation,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::NoOscillatoryContent | Error::PeakAtBandEdge { .. } | Error::DegenerateProfile => {
                ErrorCategory::Estimation
            }
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Validation,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Format(format!("{other:?}")),
            }
        } else {
            Error::Format(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Format(e.to_string())
        }
    }
}
