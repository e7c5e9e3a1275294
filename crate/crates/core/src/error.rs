use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no guided mode: no eigenvalue exceeds (k0*n_m)^2")]
    NoGuidedMode,

    #[error("eigensolver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("shifted operator is not positive definite at row {row}")]
    NotPositiveDefinite { row: usize },

    #[error("profile cut leaves the grid window at {distance_m:.3e} m from its start")]
    CutOutsideWindow { distance_m: f64 },

    #[error("region selects no grid cells")]
    EmptyRegion,

    #[error("envelope sample rate {envelope_hz} Hz does not divide trace sample rate {trace_hz} Hz")]
    SampleRateMismatch { envelope_hz: f64, trace_hz: f64 },

    #[error("series is empty")]
    EmptySeries,

    #[error("noise reference has zero variance")]
    ZeroVarianceReference,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("timestep too coarse: diffusion step {step_m:.3e} m exceeds decay length {gamma_m:.3e} m")]
    TimestepTooLarge { step_m: f64, gamma_m: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed {what} at line {line}: {message}")]
    Format {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {value}")))
    }
}

pub(crate) fn ensure_index(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("refractive index must be >= 1, got {value}")))
    }
}
