use thiserror::Error;

use crate::segment::Segment;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain (time off-grid, out of range, bad parameter).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A coefficient produced a non-finite value. Carries the offending segment.
    #[error("coefficient evaluation produced a non-finite value ({what})")]
    Coefficient { what: String, segment: Box<Segment> },

    /// The scheme state became non-finite before the overflow cap caught it.
    #[error("scheme diverged at t = {time} (step {step}){}", stage.map(|k| format!(" in stage {k}")).unwrap_or_default())]
    Diverged {
        time: f64,
        step: usize,
        stage: Option<usize>,
        trace: Option<Box<crate::scheme::StepTrace>>,
    },

    #[error("unavailable: {0}")]
    Unavailable(String),

    #[error("noise grid exhausted: {0}")]
    NoiseExhausted(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for the failure modes the solver reports as a DIVERGED verdict.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Diverged { .. } | Error::Coefficient { .. })
    }
}
