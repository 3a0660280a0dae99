use thiserror::Error;

use crate::stepper::StepKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// `s = 0` leaves the magnetic field unrecoverable from `(v, w)` unless `v == w`.
    #[error("degenerate coupling: s = 0 but v and w differ (max |v - w| = {max_gap:e})")]
    DegenerateCoupling { max_gap: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("step {step} ({kind:?}) failed: {source}")]
    Step {
        step: usize,
        kind: StepKind,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
