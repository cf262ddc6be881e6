use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<input>".into()))]
    Io {
        path: Option<PathBuf>,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` must not be empty")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: utterance `{id}` has no phones")]
    EmptyPhones { line: usize, id: String },
    #[error("invalid phone symbol {0:?}")]
    InvalidPhone(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("cannot build counts from an empty corpus")]
    EmptyCorpus,
    #[error("n-gram `{0}` is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("vocabulary for order {0} is empty")]
    EmptyVocabulary(usize),
    #[error("every configured order has an empty vocabulary")]
    AllVocabulariesEmpty,
    #[error("order {0} is not configured in this model")]
    UnknownOrder(usize),
    #[error("invalid delta {0}: must be finite and nonnegative")]
    InvalidDelta(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },
    #[error("model file is corrupted: {0}")]
    Corrupted(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("only {eligible} utterances are eligible for testing, fewer than k = {k}")]
    TooFewEligible { eligible: usize, k: usize },
    #[error("requested {requested} folds but only {available} distinct test sets exist")]
    TooManyFolds { requested: usize, available: u128 },
    #[error("delta grid is empty")]
    EmptyGrid,
    #[error("no orders given")]
    NoOrders,
    #[error("fold {fold}: {source}")]
    Train {
        fold: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
