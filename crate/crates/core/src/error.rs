use thiserror::Error;

/// Errors raised by the simulator and the estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("kernel grid too coarse: Richardson estimate {estimate:e} exceeds {limit:e}")]
    GridTooCoarse { estimate: f64, limit: f64 },

    #[error("time grids cannot be aligned: {0}")]
    GridMismatch(String),

    #[error("series too short: {len} samples, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },

    #[error("degenerate point cloud: {distinct} distinct points, need at least {needed}")]
    DegenerateCloud { distinct: usize, needed: usize },

    #[error("no neighbor candidate found at sample {index}")]
    NoNeighborFound { index: usize },

    #[error("no running-estimate samples in window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("interrupted before completion")]
    Interrupted,
}

impl Error {
    /// True for failures of the numerics on valid input, as opposed to
    /// rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::NonFiniteState { .. }
                | Error::GridTooCoarse { .. }
                | Error::DegenerateCloud { .. }
                | Error::NoNeighborFound { .. }
                | Error::EmptyWindow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
