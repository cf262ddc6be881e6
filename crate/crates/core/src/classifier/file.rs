//! JSON model files.
//!
//! ```json
//! {
//!   "checksum": "<sha256 hex of the compact payload>",
//!   "format_version": 1,
//!   "payload": { "config": ..., "labels": [...], "models": [...], "trained_on": "..." }
//! }
//! ```
//!
//! Object keys are written in sorted order, so identical models produce
//! identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{ClassifierModel, ModelConfig};
use crate::error::{ModelError, ModelFileError};
use crate::fsutil::write_atomic;
use crate::ngram::{NGram, NGramCountModel, NGramOrder, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Payload {
    config: ModelConfig,
    labels: Vec<String>,
    models: Vec<OrderTable>,
    trained_on: String,
}

#[derive(Serialize, Deserialize)]
struct OrderTable {
    order: NGramOrder,
    vocab: Vec<String>,
    classes: Vec<ClassTable>,
}

#[derive(Serialize, Deserialize)]
struct ClassTable {
    label: String,
    utterances: usize,
    total: u64,
    counts: BTreeMap<String, u64>,
}

fn checksum(payload: &Value) -> String {
    let compact = serde_json::to_string(payload).expect("JSON value serializes");
    hex::encode(Sha256::digest(compact.as_bytes()))
}

impl ClassifierModel {
    fn to_payload(&self) -> Payload {
        let models = self
            .models
            .iter()
            .map(|m| {
                let vocab = m.counts.vocab();
                OrderTable {
                    order: m.counts.order(),
                    vocab: vocab.entries().iter().map(NGram::key).collect(),
                    classes: m
                        .counts
                        .classes()
                        .iter()
                        .map(|c| ClassTable {
                            label: c.label().to_owned(),
                            utterances: c.utterances(),
                            total: c.total(),
                            counts: c
                                .nonzero()
                                .map(|(i, n)| (vocab.entries()[i].key(), n))
                                .collect(),
                        })
                        .collect(),
                }
            })
            .collect();
        Payload {
            config: self.config.clone(),
            labels: self.labels.clone(),
            models,
            trained_on: self.trained_on.clone(),
        }
    }

    /// The model file contents. Deterministic for a given model.
    pub fn to_json(&self) -> String {
        let payload = serde_json::to_value(self.to_payload()).expect("payload serializes");
        let doc = serde_json::json!({
            "checksum": checksum(&payload),
            "format_version": FORMAT_VERSION,
            "payload": payload,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("JSON value serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let corrupt = |msg: String| ModelFileError::Corrupted(msg);
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| corrupt(format!("invalid JSON: {e}")))?;
        match doc.get("format_version") {
            Some(v) if v.as_u64() == Some(FORMAT_VERSION as u64) => {}
            Some(v) => {
                return Err(ModelFileError::Version {
                    found: v.to_string().trim_matches('"').to_owned(),
                    expected: FORMAT_VERSION,
                })
            }
            None => return Err(corrupt("missing format_version".into())),
        }
        let stored = doc
            .get("checksum")
            .and_then(Value::as_str)
            .ok_or_else(|| corrupt("missing checksum".into()))?
            .to_owned();
        let payload = doc
            .get_mut("payload")
            .map(Value::take)
            .ok_or_else(|| corrupt("missing payload".into()))?;
        if checksum(&payload) != stored {
            return Err(corrupt("checksum mismatch".into()));
        }
        let payload: Payload =
            serde_json::from_value(payload).map_err(|e| corrupt(format!("bad payload: {e}")))?;
        Self::from_payload(payload).map_err(|e| corrupt(e.to_string()))
    }

    fn from_payload(p: Payload) -> Result<Self, ModelError> {
        if p.models.len() != p.config.orders.len() {
            return Err(ModelError::InvalidConfig(
                "model tables do not match configured orders".into(),
            ));
        }
        let mut counts = Vec::with_capacity(p.models.len());
        for (table, &order) in p.models.into_iter().zip(&p.config.orders) {
            if table.order != order {
                return Err(ModelError::InvalidConfig(format!(
                    "table for order {} where order {order} was expected",
                    table.order
                )));
            }
            let entries: Vec<NGram> = table.vocab.iter().map(|k| NGram::parse(k)).collect();
            if let Some(bad) = entries.iter().find(|g| g.len() != order.get()) {
                return Err(ModelError::InvalidConfig(format!(
                    "vocabulary entry `{bad}` has the wrong length for order {order}"
                )));
            }
            let vocab = Vocabulary::from_ngrams(order, entries);
            if vocab.len() != table.vocab.len() {
                return Err(ModelError::InvalidConfig(
                    "duplicate vocabulary entry".into(),
                ));
            }
            let labels: Vec<&str> = table.classes.iter().map(|c| c.label.as_str()).collect();
            if labels != p.labels {
                return Err(ModelError::InvalidConfig(format!(
                    "order {order} classes do not match the label list"
                )));
            }
            let declared: Vec<u64> = table.classes.iter().map(|c| c.total).collect();
            let model = NGramCountModel::from_counts(
                vocab,
                table
                    .classes
                    .into_iter()
                    .map(|c| {
                        let counts = c
                            .counts
                            .into_iter()
                            .map(|(k, n)| (NGram::parse(&k), n))
                            .collect();
                        (c.label, counts, c.utterances)
                    })
                    .collect(),
            )?;
            for (class, want) in model.classes().iter().zip(declared) {
                if class.total() != want {
                    return Err(ModelError::InvalidConfig(format!(
                        "class `{}` total {} does not match its counts",
                        class.label(),
                        want
                    )));
                }
            }
            counts.push(model);
        }
        Self::from_parts(p.config, p.labels, counts, p.trained_on)
    }
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    write_atomic(path, model.to_json().as_bytes()).map_err(|source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel, ModelFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ClassifierModel::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::train;
    use crate::corpus::{tokenize_phones, Corpus, Utterance};
    use crate::ngram::{PriorMode, SmoothingSpec};

    fn model() -> ClassifierModel {
        let c = Corpus::new(
            vec![
                Utterance::new("1", "X", "a a b"),
                Utterance::new("2", "Y", "b b c a"),
                Utterance::new("3", "X", "a c"),
            ],
            true,
        )
        .unwrap();
        let cfg = ModelConfig {
            orders: vec![NGramOrder::UNIGRAM, NGramOrder::BIGRAM, NGramOrder::TRIGRAM],
            smoothing: vec![
                SmoothingSpec::AbsoluteDiscount { delta: 5.0 },
                SmoothingSpec::AbsoluteDiscount { delta: 0.5 },
                SmoothingSpec::AddOne,
            ],
            prior_mode: PriorMode::Uniform,
            weights: vec![1.0, 0.25, 2.0],
        };
        train(&c, &cfg).unwrap()
    }

    #[test]
    fn round_trip_preserves_scores() {
        let m = model();
        let back = ClassifierModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.config(), m.config());
        assert_eq!(back.labels(), m.labels());
        assert_eq!(back.trained_on(), m.trained_on());
        for s in ["a", "b", "a b c", "c a a b", "", "z z"] {
            let t = tokenize_phones(s);
            assert_eq!(back.combine(&t), m.combine(&t));
            assert_eq!(back.predict(&t).label, m.predict(&t).label);
        }
        assert_eq!(back.to_json(), m.to_json());
    }

    #[test]
    fn keys_are_sorted() {
        let text = model().to_json();
        let c = text.find("\"checksum\"").unwrap();
        let f = text.find("\"format_version\"").unwrap();
        let p = text.find("\"payload\"").unwrap();
        assert!(c < f && f < p);
    }

    #[test]
    fn version_mismatch() {
        let text = model()
            .to_json()
            .replace("\"format_version\": 1", "\"format_version\": \"999\"");
        match ClassifierModel::from_json(&text).unwrap_err() {
            ModelFileError::Version { found, .. } => assert_eq!(found, "999"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn tampered_payload_fails_checksum() {
        let text = model()
            .to_json()
            .replacen("\"utterances\": 2", "\"utterances\": 3", 1);
        assert!(matches!(
            ClassifierModel::from_json(&text),
            Err(ModelFileError::Corrupted(m)) if m.contains("checksum")
        ));
        assert!(matches!(
            ClassifierModel::from_json("{"),
            Err(ModelFileError::Corrupted(_))
        ));
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = model();
        save_model(&m, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        save_model(&m, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        let back = load_model(&path).unwrap();
        let t = tokenize_phones("a b b c");
        assert_eq!(back.combine(&t), m.combine(&t));
        assert!(matches!(
            load_model(dir.path().join("missing.json")),
            Err(ModelFileError::Io { .. })
        ));
    }
}
