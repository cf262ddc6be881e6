//! Spoken intent classification from universal-phone transcriptions.
//!
//! Utterances are read from a JSON Lines manifest ([`corpus`]), turned into
//! phone n-gram count tables ([`ngram`]), and classified with a multinomial
//! Naive Bayes model that combines several n-gram orders in log space
//! ([`classifier`]). [`eval`] provides leave-k-out cross-validation and a
//! delta sweep for absolute discounting.

pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
mod fsutil;
pub mod ngram;

pub use classifier::{
    load_model, save_model, train, ClassifierModel, ModelConfig, Prediction, ScoreVector,
};
pub use corpus::{corpus_stats, parse_corpus, tokenize_phones, Corpus, PhoneToken, Utterance};
pub use error::{CorpusError, EvalError, ModelError, ModelFileError};
pub use eval::{delta_sweep, enumerate_folds, run_cv, CvSpec, EvalReport, FoldMode};
pub use fsutil::write_atomic;
pub use ngram::{
    extract_ngrams, NGram, NGramCountModel, NGramOrder, PriorMode, SmoothingSpec, Vocabulary,
};
