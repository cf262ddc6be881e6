//! N-gram extraction, per-class count tables and the two smoothing
//! estimators (add-one and absolute discounting).

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize_phones, Corpus, PhoneToken, Utterance};
use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct NGramOrder(usize);

impl NGramOrder {
    pub const UNIGRAM: NGramOrder = NGramOrder(1);
    pub const BIGRAM: NGramOrder = NGramOrder(2);
    pub const TRIGRAM: NGramOrder = NGramOrder(3);

    pub fn new(n: usize) -> Result<Self, ModelError> {
        if n == 0 {
            Err(ModelError::ZeroOrder)
        } else {
            Ok(Self(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for NGramOrder {
    type Error = ModelError;

    fn try_from(n: usize) -> Result<Self, Self::Error> {
        Self::new(n)
    }
}

impl From<NGramOrder> for usize {
    fn from(o: NGramOrder) -> usize {
        o.0
    }
}

impl fmt::Display for NGramOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A contiguous run of phone tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NGram(Vec<PhoneToken>);

impl NGram {
    pub fn new(tokens: Vec<PhoneToken>) -> Self {
        Self(tokens)
    }

    /// Parses the space-joined form produced by [`NGram::key`].
    pub fn parse(key: &str) -> Self {
        Self(tokenize_phones(key))
    }

    pub fn tokens(&self) -> &[PhoneToken] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Space-joined form, used as the map key in model files.
    pub fn key(&self) -> String {
        crate::corpus::join_phones(&self.0)
    }
}

impl Borrow<[PhoneToken]> for NGram {
    fn borrow(&self) -> &[PhoneToken] {
        &self.0
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Sliding-window n-grams without boundary padding.
pub fn extract_ngrams(tokens: &[PhoneToken], order: NGramOrder) -> Vec<NGram> {
    tokens
        .windows(order.get())
        .map(|w| NGram(w.to_vec()))
        .collect()
}

/// The distinct n-grams of one order, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    order: NGramOrder,
    entries: Vec<NGram>,
    index: HashMap<NGram, usize>,
}

impl Vocabulary {
    pub fn from_ngrams(order: NGramOrder, ngrams: impl IntoIterator<Item = NGram>) -> Self {
        let mut entries: Vec<NGram> = ngrams.into_iter().collect();
        entries.sort();
        entries.dedup();
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, g)| (g.clone(), i))
            .collect();
        Self {
            order,
            entries,
            index,
        }
    }

    /// All n-grams of `order` occurring anywhere in `utterances`.
    pub fn from_utterances<'a>(
        order: NGramOrder,
        utterances: impl IntoIterator<Item = &'a Utterance>,
    ) -> Self {
        Self::from_ngrams(
            order,
            utterances
                .into_iter()
                .flat_map(|u| extract_ngrams(&u.phones, order)),
        )
    }

    pub fn order(&self) -> NGramOrder {
        self.order
    }

    pub fn entries(&self) -> &[NGram] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, ngram: &NGram) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    /// Lookup by a window of tokens, without building an [`NGram`].
    pub fn index_of_window(&self, window: &[PhoneToken]) -> Option<usize> {
        self.index.get(window).copied()
    }

    pub fn contains(&self, ngram: &NGram) -> bool {
        self.index.contains_key(ngram)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SmoothingSpec {
    AddOne,
    AbsoluteDiscount { delta: f64 },
}

impl SmoothingSpec {
    pub fn absolute_discount(delta: f64) -> Result<Self, ModelError> {
        let spec = Self::AbsoluteDiscount { delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Self::AbsoluteDiscount { delta } if !(delta.is_finite() && delta >= 0.0) => {
                Err(ModelError::InvalidDelta(delta))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SmoothingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AddOne => f.write_str("add-one"),
            Self::AbsoluteDiscount { delta } => write!(f, "absolute-discount(delta={delta})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    #[default]
    Empirical,
    Uniform,
}

/// Per-class counts over a shared vocabulary. Counts are keyed by
/// vocabulary index; zero counts are not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    label: String,
    counts: BTreeMap<usize, u64>,
    total: u64,
    utterances: usize,
}

impl ClassCounts {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn utterances(&self) -> usize {
        self.utterances
    }

    /// Nonzero counts as (vocabulary index, count), ascending by index.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&i, &c)| (i, c))
    }

    pub fn count_at(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCountModel {
    order: NGramOrder,
    vocab: Vocabulary,
    classes: Vec<ClassCounts>,
}

/// One class for [`NGramCountModel::from_counts`]: label, counts, utterances.
pub type ClassTable = (String, Vec<(NGram, u64)>, usize);

impl NGramCountModel {
    /// Counts every n-gram of every utterance toward that utterance's
    /// intent. Classes follow the corpus label order.
    pub fn build(corpus: &Corpus, order: NGramOrder) -> Result<Self, ModelError> {
        if corpus.is_empty() {
            return Err(ModelError::EmptyCorpus);
        }
        let vocab = Vocabulary::from_utterances(order, corpus.utterances());
        let mut classes: Vec<ClassCounts> = corpus
            .labels()
            .iter()
            .map(|l| ClassCounts {
                label: l.clone(),
                counts: BTreeMap::new(),
                total: 0,
                utterances: 0,
            })
            .collect();
        let class_index: HashMap<&str, usize> = corpus
            .labels()
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        for u in corpus.utterances() {
            let class = &mut classes[class_index[u.intent.as_str()]];
            class.utterances += 1;
            for window in u.phones.windows(order.get()) {
                let idx = vocab
                    .index_of_window(window)
                    .expect("vocabulary covers the corpus");
                *class.counts.entry(idx).or_insert(0) += 1;
                class.total += 1;
            }
        }
        Ok(Self {
            order,
            vocab,
            classes,
        })
    }

    /// Assembles a model from explicit count tables. Each class is given as
    /// (label, [(n-gram, count)], utterance count). Zero counts are dropped.
    pub fn from_counts(vocab: Vocabulary, classes: Vec<ClassTable>) -> Result<Self, ModelError> {
        let mut built = Vec::with_capacity(classes.len());
        for (label, counts, utterances) in classes {
            if built.iter().any(|c: &ClassCounts| c.label == label) {
                return Err(ModelError::InvalidConfig(format!(
                    "duplicate class `{label}`"
                )));
            }
            let mut table = BTreeMap::new();
            let mut total = 0u64;
            for (g, n) in counts {
                let idx = vocab
                    .index_of(&g)
                    .ok_or_else(|| ModelError::OutOfVocabulary(g.key()))?;
                if n > 0 {
                    *table.entry(idx).or_insert(0) += n;
                    total += n;
                }
            }
            built.push(ClassCounts {
                label,
                counts: table,
                total,
                utterances,
            });
        }
        Ok(Self {
            order: vocab.order(),
            vocab,
            classes: built,
        })
    }

    pub fn order(&self) -> NGramOrder {
        self.order
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn classes(&self) -> &[ClassCounts] {
        &self.classes
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.label.as_str())
    }

    pub fn class_index(&self, label: &str) -> Result<usize, ModelError> {
        self.classes
            .iter()
            .position(|c| c.label == label)
            .ok_or_else(|| ModelError::UnknownClass(label.to_owned()))
    }

    fn class(&self, label: &str) -> Result<&ClassCounts, ModelError> {
        Ok(&self.classes[self.class_index(label)?])
    }

    pub fn count(&self, ngram: &NGram, label: &str) -> Result<u64, ModelError> {
        let class = self.class(label)?;
        Ok(self
            .vocab
            .index_of(ngram)
            .map_or(0, |idx| class.count_at(idx)))
    }

    pub fn total(&self, label: &str) -> Result<u64, ModelError> {
        Ok(self.class(label)?.total)
    }

    pub fn class_utterance_count(&self, label: &str) -> Result<usize, ModelError> {
        Ok(self.class(label)?.utterances)
    }

    pub fn total_utterances(&self) -> usize {
        self.classes.iter().map(|c| c.utterances).sum()
    }

    pub fn smoothed_prob(
        &self,
        spec: SmoothingSpec,
        ngram: &NGram,
        label: &str,
    ) -> Result<f64, ModelError> {
        let class = self.class_index(label)?;
        let idx = self
            .vocab
            .index_of(ngram)
            .ok_or_else(|| ModelError::OutOfVocabulary(ngram.key()))?;
        Ok(self.estimator(spec)?.prob(self, class, idx))
    }

    pub fn class_prior(&self, mode: PriorMode, label: &str) -> Result<f64, ModelError> {
        let class = self.class(label)?;
        Ok(match mode {
            PriorMode::Empirical => class.utterances as f64 / self.total_utterances() as f64,
            PriorMode::Uniform => 1.0 / self.classes.len() as f64,
        })
    }

    /// Precomputes the per-class constants of `spec` for repeated lookups.
    pub fn estimator(&self, spec: SmoothingSpec) -> Result<Estimator, ModelError> {
        spec.validate()?;
        let v = self.vocab.len();
        if v == 0 {
            return Err(ModelError::EmptyVocabulary(self.order.get()));
        }
        let v_f = v as f64;
        let per_class = self
            .classes
            .iter()
            .map(|c| {
                let total = c.total as f64;
                match spec {
                    _ if c.total == 0 => ClassConstants {
                        denominator: 1.0,
                        floor: 1.0 / v_f,
                    },
                    SmoothingSpec::AddOne => ClassConstants {
                        denominator: total + v_f,
                        floor: 0.0,
                    },
                    SmoothingSpec::AbsoluteDiscount { delta } => {
                        let reserved: f64 = c
                            .counts
                            .values()
                            .map(|&n| (n as f64).min(delta))
                            .sum::<f64>()
                            / total;
                        ClassConstants {
                            denominator: total,
                            floor: reserved / v_f,
                        }
                    }
                }
            })
            .collect();
        Ok(Estimator { spec, per_class })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ClassConstants {
    denominator: f64,
    /// Mass every vocabulary entry receives regardless of its count.
    floor: f64,
}

/// Smoothing constants for one [`NGramCountModel`] under one
/// [`SmoothingSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    spec: SmoothingSpec,
    per_class: Vec<ClassConstants>,
}

impl Estimator {
    pub fn spec(&self) -> SmoothingSpec {
        self.spec
    }

    /// P(w | c) for vocabulary index `index` and class index `class` of `model`.
    pub fn prob(&self, model: &NGramCountModel, class: usize, index: usize) -> f64 {
        let k = self.per_class[class];
        let counts = &model.classes[class];
        if counts.total == 0 {
            return k.floor;
        }
        let n = counts.count_at(index) as f64;
        match self.spec {
            SmoothingSpec::AddOne => (n + 1.0) / k.denominator,
            SmoothingSpec::AbsoluteDiscount { delta } => {
                (n - delta).max(0.0) / k.denominator + k.floor
            }
        }
    }

    /// Reserved mass R(c)/V handed to every vocabulary entry; zero for add-one
    /// on classes with data.
    pub fn floor(&self, class: usize) -> f64 {
        self.per_class[class].floor
    }
}
