//! Library error type.

use thiserror::Error;

/// Errors raised by parameter validation and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("time {t} is outside the valid range [{lo}, {hi})")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("step size {dt} violates the stability bound: {reason}")]
    CflViolation { dt: f64, reason: String },
    #[error("kernel window reaches t = {reach}, beyond the usable horizon {limit}")]
    HorizonExceeded { reach: f64, limit: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("fixed-point iteration did not converge at t = {t} after {iterations} sweeps")]
    NoConvergence { t: f64, iterations: usize },
    #[error("series did not reach tolerance {tol} by order {order} at t = {t}")]
    SeriesDivergent { t: f64, order: usize, tol: f64 },
    #[error("non-finite state detected at t = {t}")]
    Instability { t: f64 },
    #[error("time mismatch between state ({state}) and traces ({traces})")]
    TimeMismatch { state: f64, traces: f64 },
    #[error("inadmissible Lyapunov weights: {0}")]
    InadmissibleWeights(String),
    #[error("single snapshot supplied where a velocity is required")]
    MissingVelocity,
    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Library result alias.
pub type Result<T> = std::result::Result<T, Error>;
