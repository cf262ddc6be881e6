//! Corpus data model and the JSON Lines manifest format.
//!
//! Each manifest line describes one utterance. `id`, `intent` and `phones`
//! are required; `phones` is a single whitespace-separated string exactly as
//! a phone recognizer prints it. Unknown fields are ignored.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CorpusError;

/// A single phone symbol emitted by the recognizer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhoneToken(String);

impl PhoneToken {
    pub fn new(symbol: impl Into<String>) -> Result<Self, CorpusError> {
        let symbol = symbol.into();
        if symbol.is_empty() || symbol.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidPhone(symbol));
        }
        Ok(Self(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PhoneToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Splits recognizer output on runs of whitespace.
pub fn tokenize_phones(raw: &str) -> Vec<PhoneToken> {
    raw.split_whitespace()
        .map(|s| PhoneToken(s.to_owned()))
        .collect()
}

/// Joins tokens with single spaces, the inverse of [`tokenize_phones`].
pub fn join_phones(tokens: &[PhoneToken]) -> String {
    tokens
        .iter()
        .map(PhoneToken::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub speaker: Option<String>,
    pub language: Option<String>,
    pub intent: String,
    pub phones: Vec<PhoneToken>,
    /// Links pseudo-parallel renditions of the same interaction. Carried
    /// through untouched; nothing in the classifier reads it.
    pub parallel_group: Option<String>,
    pub audio_path: Option<String>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, intent: impl Into<String>, phones: &str) -> Self {
        Self {
            id: id.into(),
            speaker: None,
            language: None,
            intent: intent.into(),
            phones: tokenize_phones(phones),
            parallel_group: None,
            audio_path: None,
        }
    }

    fn to_record(&self) -> ManifestRecord {
        ManifestRecord {
            id: Some(self.id.clone()),
            speaker: self.speaker.clone(),
            language: self.language.clone(),
            intent: Some(self.intent.clone()),
            phones: Some(join_phones(&self.phones)),
            parallel_group: self.parallel_group.clone(),
            audio_path: self.audio_path.clone(),
        }
    }

    /// Serializes the utterance as one manifest line (no trailing newline).
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("manifest record serializes")
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ManifestRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    speaker: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    language: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    intent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phones: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    parallel_group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    audio_path: Option<String>,
}

/// An ordered collection of utterances with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    utterances: Vec<Utterance>,
    labels: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids. Empty phone sequences are
    /// rejected only when `strict` is set.
    pub fn new(utterances: Vec<Utterance>, strict: bool) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (idx, u) in utterances.iter().enumerate() {
            validate_utterance(u, idx + 1, strict, &mut seen)?;
        }
        Ok(Self::from_validated(utterances))
    }

    fn from_validated(utterances: Vec<Utterance>) -> Self {
        let mut labels: Vec<String> = Vec::new();
        for u in &utterances {
            if !labels.contains(&u.intent) {
                labels.push(u.intent.clone());
            }
        }
        Self { utterances, labels }
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    /// Distinct intent labels in first-appearance order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }

    /// Returns the sub-corpus of utterances whose ids satisfy `keep`,
    /// preserving order. Labels are recomputed from the kept utterances.
    pub fn filter(&self, mut keep: impl FnMut(&Utterance) -> bool) -> Corpus {
        Self::from_validated(
            self.utterances
                .iter()
                .filter(|u| keep(u))
                .cloned()
                .collect(),
        )
    }

    /// Writes the corpus in manifest format.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for u in &self.utterances {
            writeln!(out, "{}", u.to_jsonl())?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("manifest is UTF-8")
    }

    /// SHA-256 over the canonical manifest serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_jsonl().as_bytes()))
    }
}

fn validate_utterance(
    u: &Utterance,
    line: usize,
    strict: bool,
    seen: &mut HashSet<String>,
) -> Result<(), CorpusError> {
    if u.id.is_empty() {
        return Err(CorpusError::EmptyField { line, field: "id" });
    }
    if !seen.insert(u.id.clone()) {
        return Err(CorpusError::DuplicateId {
            line,
            id: u.id.clone(),
        });
    }
    if strict && u.phones.is_empty() {
        return Err(CorpusError::EmptyPhones {
            line,
            id: u.id.clone(),
        });
    }
    Ok(())
}

/// Parses a manifest from any reader. Blank lines are skipped.
pub fn read_corpus<R: Read>(reader: R, strict: bool) -> Result<Corpus, CorpusError> {
    let mut utterances = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| CorpusError::Io { path: None, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
                line: line_no,
                message: e.to_string(),
            })?;
        let missing = |field: &'static str| CorpusError::MissingField {
            line: line_no,
            field,
        };
        let utterance = Utterance {
            id: record.id.ok_or_else(|| missing("id"))?,
            intent: record.intent.ok_or_else(|| missing("intent"))?,
            phones: tokenize_phones(&record.phones.ok_or_else(|| missing("phones"))?),
            speaker: record.speaker,
            language: record.language,
            parallel_group: record.parallel_group,
            audio_path: record.audio_path,
        };
        validate_utterance(&utterance, line_no, strict, &mut seen)?;
        utterances.push(utterance);
    }
    Ok(Corpus::from_validated(utterances))
}

pub fn parse_corpus_str(text: &str, strict: bool) -> Result<Corpus, CorpusError> {
    read_corpus(text.as_bytes(), strict)
}

pub fn parse_corpus(path: impl AsRef<Path>, strict: bool) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: Some(path.to_path_buf()),
        source,
    })?;
    read_corpus(file, strict)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    /// Utterance count per label, in corpus label order.
    pub per_label: Vec<(String, usize)>,
    pub total: usize,
}

pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    let per_label = c
        .labels()
        .iter()
        .map(|l| {
            let n = c.utterances().iter().filter(|u| &u.intent == l).count();
            (l.clone(), n)
        })
        .collect();
    CorpusStats {
        per_label,
        total: c.len(),
    }
}
