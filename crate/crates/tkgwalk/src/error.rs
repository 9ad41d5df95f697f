use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: malformed line: {msg}")]
    Parse {
        source_name: String,
        line: usize,
        msg: String,
    },
    #[error("empty train split")]
    EmptyTrainSplit,
    #[error("{kind} id {id} out of bounds (declared count {declared})")]
    IdOutOfBounds {
        kind: &'static str,
        id: u64,
        declared: u64,
    },
    #[error("manifest mismatch for {key}: declared {declared}, got {actual}")]
    ManifestMismatch {
        key: &'static str,
        declared: u64,
        actual: u64,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("illegal transition: {0}")]
    IllegalTransition(String),
    #[error("reward undefined: query has no truth object")]
    MissingTruth,
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("missing run directory: {0}")]
    MissingRun(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
