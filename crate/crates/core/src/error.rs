use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("need at least 2 topics to split, got {0}")]
    TooFewTopics(usize),

    #[error("corpus contains no usable tokens")]
    EmptyCorpus,

    #[error("vocabulary has {0} entries, need at least 2")]
    VocabularyTooSmall(usize),

    #[error("neighbor index has no points")]
    EmptyIndex,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no seed adopter of topic {topic} has an embedding")]
    NoEmbeddedSeeds { topic: String },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("train fraction {fraction} yields an empty train set ({total} users)")]
    EmptyTrainSet { fraction: f64, total: usize },

    #[error("no test topic passes the adopter-count filter (min {min_adopters})")]
    NoTopicsPassFilter { min_adopters: usize },

    #[error("co-adoption likelihood undefined for {user}: empty neighbor or topic set")]
    CoAdoptionUndefined { user: String },

    #[error("sample size {requested} exceeds available vectors ({available})")]
    SampleTooLarge { requested: usize, available: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
