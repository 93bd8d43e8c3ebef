use thiserror::Error;

use crate::trace::Trace;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A procedure was called outside its precondition.
    #[error("contract violated: {0}")]
    Contract(String),

    /// An invariant that the algorithm guarantees failed to hold.
    /// The partial trace is kept for post-mortem.
    #[error("internal invariant failed: {message}")]
    Invariant { message: String, trace: Box<Trace> },

    #[error("iteration budget of {budget} exhausted in {context}")]
    Budget {
        context: &'static str,
        budget: usize,
        trace: Box<Trace>,
    },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant {
            message: msg.into(),
            trace: Box::default(),
        }
    }

    pub(crate) fn with_trace(self, t: &Trace) -> Self {
        match self {
            Error::Invariant { message, .. } => Error::Invariant {
                message,
                trace: Box::new(t.clone()),
            },
            Error::Budget { context, budget, .. } => Error::Budget {
                context,
                budget,
                trace: Box::new(t.clone()),
            },
            other => other,
        }
    }

    pub fn trace(&self) -> Option<&Trace> {
        match self {
            Error::Invariant { trace, .. } | Error::Budget { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
