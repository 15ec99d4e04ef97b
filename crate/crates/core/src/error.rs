use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("predicate id {0} out of range (vocabulary size {max})", max = crate::logic::VOCAB_SIZE)]
    PredicateOutOfRange(u32),

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("bucket ({delta}, label {label}) starved after {attempts} candidates ({filled}/{wanted} filled)")]
    BucketStarved {
        delta: u32,
        label: bool,
        attempts: u64,
        filled: usize,
        wanted: usize,
    },

    #[error("encoded length {len} exceeds limit {max}")]
    TooLong { len: usize, max: usize },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("invalid segmentation: {0}")]
    Segmentation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("missing ablation configuration {0:04b}")]
    MissingConfiguration(u8),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
