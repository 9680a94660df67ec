use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("parameter {x} outside domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver did not converge: off-diagonal residual {residual:e} after {sweeps} sweeps")]
    NoConvergence { residual: f64, sweeps: usize },

    #[error("index {index} out of range 1..={order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("at x = {x}: {source}")]
    At { x: f64, source: Box<Error> },
}

impl Error {
    /// True for failures of the numerics, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::At { source, .. } => source.is_numerical(),
            e => matches!(e, Error::NoConvergence { .. } | Error::InsufficientData(_)),
        }
    }
}

impl Error {
    /// Tags the error with the family parameter it occurred at.
    pub fn at(self, x: f64) -> Self {
        Error::At { x, source: Box::new(self) }
    }
}
