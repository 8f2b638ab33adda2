use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no observed events")]
    NoEvents,

    #[error("empty arm {0}")]
    EmptyArm(u8),

    #[error("insufficient events: requested {requested}, only {available} occur")]
    InsufficientEvents { requested: usize, available: usize },

    #[error("degenerate variance (V = 0)")]
    DegenerateVariance,

    #[error("time {tau} is beyond the last follow-up time {last}")]
    BeyondFollowUp { tau: f64, last: f64 },

    #[error("analysis {requested} exceeds the maximum of {max} analyses")]
    TooManyAnalyses { requested: usize, max: usize },

    #[error("trial already stopped at analysis {0}")]
    TrialStopped(usize),

    #[error("{0}")]
    Unattainable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("state inconsistency: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::State(_) | Error::TrialStopped(_) | Error::TooManyAnalyses { .. } => 3,
            Error::Numerical(_) | Error::DegenerateVariance | Error::Unattainable(_) => 4,
            _ => 2,
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
