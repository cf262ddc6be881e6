//! Leave-k-out cross-validation, accuracy and confusion reporting, and the
//! per-order delta sweep for absolute discounting.
//!
//! Labels listed in [`CvSpec::exclude_from_test`] never appear in a test set
//! but are always part of training, and predictions range over every label
//! the fold's model was trained on.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{train, ModelConfig};
use crate::corpus::Corpus;
use crate::error::EvalError;
use crate::ngram::{NGramOrder, PriorMode, SmoothingSpec, Vocabulary};

/// Printed alongside every sweep: the best delta is picked on the same
/// folds whose accuracy is reported.
pub const SWEEP_CAVEAT: &str =
    "best delta is selected on the same cross-validation folds it is reported on; \
     treat the best-delta accuracies as optimistic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Every k-subset of the eligible utterances.
    Exhaustive,
    /// `count` distinct k-subsets drawn with a seeded generator.
    RandomSample { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CvSpec {
    pub k: usize,
    pub exclude_from_test: BTreeSet<String>,
    pub mode: FoldMode,
}

impl CvSpec {
    pub fn exhaustive(k: usize) -> Self {
        Self {
            k,
            exclude_from_test: BTreeSet::new(),
            mode: FoldMode::Exhaustive,
        }
    }

    pub fn excluding<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.exclude_from_test
            .extend(labels.into_iter().map(Into::into));
        self
    }

    pub fn with_mode(mut self, mode: FoldMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub id: usize,
    /// Sorted.
    pub test_ids: Vec<String>,
    /// Corpus order.
    pub train_ids: Vec<String>,
}

/// C(n, k), or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Advances `idx` to the next k-combination of 0..n in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
        return false;
    };
    idx[i] += 1;
    for j in i + 1..k {
        idx[j] = idx[j - 1] + 1;
    }
    true
}

/// The `rank`-th k-combination of 0..n in lexicographic order.
fn unrank_combination(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        loop {
            let remaining = k - slot - 1;
            let with_next = binomial(n - next - 1, remaining).expect("rank fits in u128");
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

const ENUMERATE_LIMIT: u128 = 1 << 24;

pub fn enumerate_folds(corpus: &Corpus, spec: &CvSpec) -> Result<Vec<Fold>, EvalError> {
    if spec.k == 0 {
        return Err(EvalError::ZeroK);
    }
    let mut eligible: Vec<&str> = corpus
        .utterances()
        .iter()
        .filter(|u| !spec.exclude_from_test.contains(&u.intent))
        .map(|u| u.id.as_str())
        .collect();
    eligible.sort_unstable();
    let (e, k) = (eligible.len(), spec.k);
    if e < k {
        return Err(EvalError::TooFewEligible { eligible: e, k });
    }

    let subsets: Vec<Vec<usize>> = match spec.mode {
        FoldMode::Exhaustive => {
            let mut idx: Vec<usize> = (0..k).collect();
            let mut all = vec![idx.clone()];
            while next_combination(&mut idx, e) {
                all.push(idx.clone());
            }
            all
        }
        FoldMode::RandomSample { count, seed } => {
            let available = binomial(e, k).unwrap_or(u128::MAX);
            if count as u128 > available {
                return Err(EvalError::TooManyFolds {
                    requested: count,
                    available,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<Vec<usize>> = if available <= ENUMERATE_LIMIT {
                index::sample(&mut rng, available as usize, count)
                    .into_iter()
                    .map(|r| unrank_combination(r as u128, e, k))
                    .collect()
            } else {
                let mut seen = HashSet::with_capacity(count);
                let mut out = Vec::with_capacity(count);
                while out.len() < count {
                    let mut s = index::sample(&mut rng, e, k).into_vec();
                    s.sort_unstable();
                    if seen.insert(s.clone()) {
                        out.push(s);
                    }
                }
                out
            };
            picked.sort();
            picked
        }
    };

    Ok(subsets
        .into_iter()
        .enumerate()
        .map(|(id, subset)| {
            let test_ids: Vec<String> = subset.iter().map(|&i| eligible[i].to_owned()).collect();
            let train_ids = corpus
                .utterances()
                .iter()
                .filter(|u| !test_ids.contains(&u.id))
                .map(|u| u.id.clone())
                .collect();
            Fold {
                id,
                test_ids,
                train_ids,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldRecord {
    pub fold_id: usize,
    pub test_ids: Vec<String>,
    pub gold: Vec<String>,
    pub predicted: Vec<String>,
}

impl FoldRecord {
    pub fn correct(&self) -> usize {
        self.gold
            .iter()
            .zip(&self.predicted)
            .filter(|(g, p)| g == p)
            .count()
    }
}

/// Rows are gold labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    fn new(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index(&self, label: &str) -> usize {
        self.labels
            .iter()
            .position(|l| l == label)
            .expect("label belongs to the corpus")
    }

    fn record(&mut self, gold: &str, predicted: &str) {
        let (g, p) = (self.index(gold), self.index(predicted));
        self.counts[g][p] += 1;
    }

    pub fn diagonal(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, label: &str) -> usize {
        self.counts[self.index(label)].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VocabSize {
    pub order: NGramOrder,
    pub unique_ngrams: usize,
}

/// Unique n-gram counts over the whole corpus.
pub fn vocab_sizes(corpus: &Corpus, orders: &[NGramOrder]) -> Vec<VocabSize> {
    orders
        .iter()
        .map(|&order| VocabSize {
            order,
            unique_ngrams: Vocabulary::from_utterances(order, corpus.utterances()).len(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: ModelConfig,
    pub cv: CvSpec,
    pub folds: Vec<FoldRecord>,
    pub correct: usize,
    pub total: usize,
    /// Micro-averaged over test instances.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub vocab_sizes: Vec<VocabSize>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per fold: fold_id, test_ids, gold, predicted, correct.
    /// Multi-valued cells are joined with `;`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["fold_id", "test_ids", "gold", "predicted", "correct"])
            .expect("in-memory write");
        for f in &self.folds {
            w.write_record([
                f.fold_id.to_string(),
                f.test_ids.join(";"),
                f.gold.join(";"),
                f.predicted.join(";"),
                f.correct().to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8")
    }
}

pub fn run_cv(
    corpus: &Corpus,
    config: &ModelConfig,
    spec: &CvSpec,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    let folds = enumerate_folds(corpus, spec)?;
    let records = folds
        .par_iter()
        .map(|fold| evaluate_fold(corpus, config, fold))
        .collect::<Result<Vec<_>, _>>()?;

    let mut confusion = ConfusionMatrix::new(corpus.labels().to_vec());
    for r in &records {
        for (g, p) in r.gold.iter().zip(&r.predicted) {
            confusion.record(g, p);
        }
    }
    let correct = confusion.diagonal();
    let total = confusion.total();
    Ok(EvalReport {
        config: config.clone(),
        cv: spec.clone(),
        folds: records,
        correct,
        total,
        accuracy: if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        },
        confusion,
        vocab_sizes: vocab_sizes(corpus, &config.orders),
    })
}

fn evaluate_fold(
    corpus: &Corpus,
    config: &ModelConfig,
    fold: &Fold,
) -> Result<FoldRecord, EvalError> {
    let train_set: HashSet<&str> = fold.train_ids.iter().map(String::as_str).collect();
    let training = corpus.filter(|u| train_set.contains(u.id.as_str()));
    let model = train(&training, config).map_err(|source| EvalError::Train {
        fold: fold.id,
        source,
    })?;
    let mut gold = Vec::with_capacity(fold.test_ids.len());
    let mut predicted = Vec::with_capacity(fold.test_ids.len());
    for id in &fold.test_ids {
        let u = corpus.get(id).expect("fold ids come from the corpus");
        gold.push(u.intent.clone());
        predicted.push(model.predict(&u.phones).label);
    }
    Ok(FoldRecord {
        fold_id: fold.id,
        test_ids: fold.test_ids.clone(),
        gold,
        predicted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub order: NGramOrder,
    pub delta: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub note: &'static str,
    /// Grouped by order, grid order within each group.
    pub rows: Vec<SweepRow>,
    /// Highest-accuracy delta per order; ties go to the smallest delta.
    pub best: Vec<SweepRow>,
}

impl SweepTable {
    pub fn best_delta(&self, order: NGramOrder) -> Option<f64> {
        self.best.iter().find(|r| r.order == order).map(|r| r.delta)
    }

    /// Columns: order, delta, accuracy.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["order", "delta", "accuracy"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.order.to_string(),
                r.delta.to_string(),
                r.accuracy.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serializes");
        s.push('\n');
        s
    }
}

/// Cross-validates every (order, delta) pair with absolute discounting on a
/// single-order model.
pub fn delta_sweep(
    corpus: &Corpus,
    orders: &[NGramOrder],
    grid: &[f64],
    spec: &CvSpec,
    prior_mode: PriorMode,
) -> Result<SweepTable, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    if orders.is_empty() {
        return Err(EvalError::NoOrders);
    }
    for &d in grid {
        SmoothingSpec::absolute_discount(d).map_err(EvalError::Model)?;
    }
    let mut rows = Vec::with_capacity(orders.len() * grid.len());
    let mut best = Vec::with_capacity(orders.len());
    for &order in orders {
        let mut best_row: Option<SweepRow> = None;
        for &delta in grid {
            let cfg = ModelConfig::single(order, SmoothingSpec::AbsoluteDiscount { delta })
                .with_prior(prior_mode);
            let accuracy = run_cv(corpus, &cfg, spec)?.accuracy;
            let row = SweepRow {
                order,
                delta,
                accuracy,
            };
            let better = match &best_row {
                None => true,
                Some(b) => accuracy > b.accuracy || (accuracy == b.accuracy && delta < b.delta),
            };
            if better {
                best_row = Some(row.clone());
            }
            rows.push(row);
        }
        best.push(best_row.expect("grid is nonempty"));
    }
    Ok(SweepTable {
        note: SWEEP_CAVEAT,
        rows,
        best,
    })
}
