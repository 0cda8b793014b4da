use thiserror::Error;

/// Coarse error classes, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    InvalidInput,
    Precondition,
    Capacity,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::InvalidInput => 3,
            ErrorCategory::Precondition => 4,
            ErrorCategory::Capacity => 5,
            ErrorCategory::Numerical => 6,
            ErrorCategory::Io => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::InvalidInput => "invalid-input",
            ErrorCategory::Precondition => "precondition",
            ErrorCategory::Capacity => "capacity",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("index out of range: {what} {index} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("agent {agent}: signal {signal} has zero probability under the true state")]
    TruthImpossibleSignal { agent: usize, signal: usize },

    #[error("agent {agent}: signal {signal} has zero probability under every state")]
    ImpossibleSignal { agent: usize, signal: usize },

    #[error("agent {agent}: posterior is identically zero")]
    DegeneratePosterior { agent: usize },

    #[error("binary state space required, model has {states} states")]
    NotBinary { states: usize },

    #[error("agent {agent}: dichotomy cell {cell} has zero mass under state {state} only")]
    DegenerateDichotomy {
        agent: usize,
        cell: i8,
        state: usize,
    },

    #[error("network is not strongly connected")]
    NotStronglyConnected,

    #[error("agent {agent}: expected exactly one in-neighbor, found {degree}")]
    InDegreeNotOne { agent: usize, degree: usize },

    #[error("agent {agent}: empty neighborhood")]
    EmptyNeighborhood { agent: usize },

    #[error("priors differ between agents {a} and {b}; a common prior is required")]
    NoCommonPrior { a: usize, b: usize },

    #[error("agent {agent}: reported belief of neighbor {neighbor} is not reachable by any signal")]
    UnreachableBelief { agent: usize, neighbor: usize },

    #[error("{agents} agents exceed the dense kernel cap of {cap}")]
    KernelCapacity { agents: usize, cap: usize },

    #[error("invalid neighbor-choice distribution for agent {agent}: {reason}")]
    InvalidChoice { agent: usize, reason: String },

    #[error("{0}")]
    Precondition(String),

    #[error("{0}")]
    Numerical(String),

    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: String, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidModel(_)
            | Error::OutOfRange { .. }
            | Error::InvalidChoice { .. }
            | Error::MalformedArtifact { .. }
            | Error::Json(_)
            | Error::Csv(_) => ErrorCategory::InvalidInput,
            Error::KernelCapacity { .. } => ErrorCategory::Capacity,
            Error::Numerical(_) => ErrorCategory::Numerical,
            Error::Io(_) => ErrorCategory::Io,
            Error::Context { source, .. } => source.category(),
            _ => ErrorCategory::Precondition,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
