use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // corpus
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error("insufficient data: need {needed} documents, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // word2vec
    #[error("bad word2vec header: {0}")]
    BadHeader(String),
    #[error("truncated word2vec file: expected {expected} entries, got {got}")]
    TruncatedFile { expected: usize, got: usize },
    #[error("non-finite value in vector for {0:?}")]
    NonFiniteValue(String),
    #[error("word {0:?} cannot be encoded in word2vec binary format")]
    InvalidWord(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // models
    #[error("empty sentence")]
    EmptySentence,
    #[error("empty document")]
    EmptyDocument,
    #[error("filter width {width} exceeds sentence length {len}")]
    WindowTooLarge { width: usize, len: usize },
    #[error("empty feature map")]
    EmptyFeatureMap,
    #[error("forward cache does not match model: {0}")]
    StaleCache(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    // checkpoints
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    VersionUnsupported(u16),
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
    #[error("checkpoint holds a {found} model, expected {expected}")]
    BadModelKind { expected: &'static str, found: &'static str },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    // analysis
    #[error("no tokens reach the minimum count in both corpora")]
    NoSharedTokens,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("t-SNE needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} too large for {points} points")]
    PerplexityTooLarge { perplexity: f64, points: usize },

    // ingest
    #[error("HTTP status {0}")]
    Http(u16),
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
    #[error("malformed response: nothing at {0}")]
    MalformedResponse(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}
