use crate::perm::{Assignment, Element};
use crate::trace::TraceRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("element {0} not found in assignment")]
    ElementNotFound(Element),

    #[error("rank {rank} out of bounds for an assignment of length {len}")]
    InvalidRank { rank: usize, len: usize },

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("incompatible assignments: {0}")]
    IncompatibleAssignments(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("empty batch: at least one game sample is required")]
    EmptyBatch,

    #[error("replay miss: assignment `{0}` is not in the fixture")]
    ReplayMiss(Assignment),

    #[error("oracle I/O error: {message} (payload: {payload:?})")]
    OracleIo { message: String, payload: String },

    #[error("invalid temperature {0}: must be > 0")]
    InvalidTemperature(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{stage} failed after {} trace records: {source}", .partial_trace.len())]
    Stage {
        stage: &'static str,
        partial_trace: Vec<TraceRecord>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    /// The innermost error, unwrapping any stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
