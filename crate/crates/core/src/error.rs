use thiserror::Error;

use crate::solver::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size error: need at least {needed} nodes, got {got}")]
    Size { needed: usize, got: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("quadrature did not converge: value {value}, error estimate {error} (tolerance {tolerance})")]
    Quadrature { value: f64, error: f64, tolerance: f64 },

    #[error("step failed at t = {time}: Newton residual {residual:e} after {iterations} iterations")]
    StepFailure { time: f64, residual: f64, iterations: usize },

    #[error("run failed at t = {}: {source}", .partial.times().last().copied().unwrap_or(f64::NAN))]
    Run {
        partial: Box<Trajectory>,
        #[source]
        source: Box<Error>,
    },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("time {0} is not a sample time of the trajectory")]
    NotSampled(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
