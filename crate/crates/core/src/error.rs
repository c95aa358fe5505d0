use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage order violation: `{stage}` needs the output of `{required}`; run `{required}` first")]
    StageOrder { stage: String, required: String },

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("no edges")]
    NoEdges,

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("graph file: {0}")]
    Graph(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_) | Error::Io { .. } => 3,
            Error::StageOrder { .. } => 4,
            Error::Adapter(_) => 5,
            _ => 1,
        }
    }
}
