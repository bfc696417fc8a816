use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A linear or eigen solve could not be carried out.
    #[error("solver failure: {0}")]
    Solver(String),

    /// The constraint set of an optimization problem is empty.
    #[error("infeasible problem: {0}")]
    Infeasible(String),

    /// Every bar of a lattice unit was removed during repair.
    #[error("lattice unit has no bars left")]
    EmptyUnit,

    /// No connector could be placed across a cell interface.
    #[error("cannot connect units across {0}")]
    Connector(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A pipeline stage failed; artifacts written before the failure are kept.
    #[error("stage {stage} failed: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// The innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
