use thiserror::Error;

/// Errors raised by the model, simulation and moment engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("z.jumps[{index}]: {reason}")]
    ZSupport { index: usize, reason: String },

    #[error("zero Z specification: no decay and no collapses")]
    ZeroSpec,

    #[error("negative argument: {0}")]
    NegativeArgument(String),

    #[error("event at t={time} lies outside (0, {horizon}]")]
    EventOutsideHorizon { time: f64, horizon: f64 },

    #[error("events are not sorted by time (index {0})")]
    UnsortedEvents(usize),

    #[error("time interval reversed: u={u} > t={t}")]
    ReversedInterval { u: f64, t: f64 },

    #[error("evaluation time {t} beyond horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("inputs do not match: {0}")]
    Mismatch(String),

    #[error("near-tied arguments (gap {gap:e} below {tol:e}); use the uniformization route")]
    Ties { gap: f64, tol: f64 },

    #[error("moment order {n} exceeds the configured maximum {max}")]
    OrderTooLarge { n: usize, max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
