//! Multinomial Naive Bayes over phone n-grams.
//!
//! One count model is trained per configured order. An utterance is scored
//! per order as the sum of log n-gram probabilities, and orders are combined
//! as a weighted sum of those log-likelihoods plus a single log prior:
//!
//! ```text
//! score(c) = ln P(c) + Σ_o weight_o · Σ_{w ∈ ngrams_o(x)} ln P_o(w | c)
//! ```
//!
//! N-grams absent from an order's training vocabulary are skipped.

mod file;

pub use file::{load_model, save_model, FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PhoneToken};
use crate::error::ModelError;
use crate::ngram::{Estimator, NGramCountModel, NGramOrder, PriorMode, SmoothingSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub orders: Vec<NGramOrder>,
    /// One estimator per entry of `orders`.
    pub smoothing: Vec<SmoothingSpec>,
    pub prior_mode: PriorMode,
    /// One nonnegative weight per entry of `orders`.
    pub weights: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::uniform_smoothing(
            vec![NGramOrder::UNIGRAM, NGramOrder::BIGRAM, NGramOrder::TRIGRAM],
            SmoothingSpec::AddOne,
        )
    }
}

impl ModelConfig {
    /// Same estimator for every order, unit weights, empirical prior.
    pub fn uniform_smoothing(orders: Vec<NGramOrder>, smoothing: SmoothingSpec) -> Self {
        let n = orders.len();
        Self {
            orders,
            smoothing: vec![smoothing; n],
            prior_mode: PriorMode::Empirical,
            weights: vec![1.0; n],
        }
    }

    pub fn single(order: NGramOrder, smoothing: SmoothingSpec) -> Self {
        Self::uniform_smoothing(vec![order], smoothing)
    }

    pub fn with_prior(mut self, prior_mode: PriorMode) -> Self {
        self.prior_mode = prior_mode;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let invalid = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.orders.is_empty() {
            return invalid("at least one order is required".into());
        }
        for (i, o) in self.orders.iter().enumerate() {
            if self.orders[..i].contains(o) {
                return invalid(format!("order {o} listed twice"));
            }
        }
        if self.smoothing.len() != self.orders.len() {
            return invalid(format!(
                "{} smoothing specs for {} orders",
                self.smoothing.len(),
                self.orders.len()
            ));
        }
        for s in &self.smoothing {
            s.validate()?;
        }
        check_weights(&self.weights, self.orders.len())?;
        if !self.weights.iter().any(|&w| w > 0.0) {
            return invalid("at least one weight must be positive".into());
        }
        Ok(())
    }
}

fn check_weights(weights: &[f64], orders: usize) -> Result<(), ModelError> {
    if weights.len() != orders {
        return Err(ModelError::InvalidConfig(format!(
            "{} weights for {} orders",
            weights.len(),
            orders
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(ModelError::InvalidConfig(format!(
            "weight {w} must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// Relative gap below which two log scores are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Natural-log class scores, one per model label in label order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreVector {
    pub labels: Vec<String>,
    pub log_scores: Vec<f64>,
}

impl ScoreVector {
    fn zeros(labels: &[String]) -> Self {
        Self {
            labels: labels.to_vec(),
            log_scores: vec![0.0; labels.len()],
        }
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.log_scores[i])
    }

    /// Index of the highest score. Scores within [`TIE_TOLERANCE`] (relative)
    /// of the maximum count as tied, and the first tied label wins, so exact
    /// probability ties do not depend on floating-point summation order.
    pub fn argmax(&self) -> usize {
        let max = self
            .log_scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return 0;
        }
        let floor = max - TIE_TOLERANCE * max.abs().max(1.0);
        self.log_scores
            .iter()
            .position(|&s| s >= floor)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub scores: ScoreVector,
}

#[derive(Debug, Clone)]
struct OrderModel {
    counts: NGramCountModel,
    /// `None` when the order's vocabulary is empty; such an order scores 0.
    estimator: Option<Estimator>,
}

impl OrderModel {
    fn new(counts: NGramCountModel, smoothing: SmoothingSpec) -> Result<Self, ModelError> {
        let estimator = if counts.vocab().is_empty() {
            smoothing.validate()?;
            None
        } else {
            Some(counts.estimator(smoothing)?)
        };
        Ok(Self { counts, estimator })
    }
}

/// A trained classifier. Immutable; safe to share across threads.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    config: ModelConfig,
    labels: Vec<String>,
    models: Vec<OrderModel>,
    trained_on: String,
}

pub fn train(corpus: &Corpus, config: &ModelConfig) -> Result<ClassifierModel, ModelError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let models = config
        .orders
        .iter()
        .zip(&config.smoothing)
        .map(|(&order, &smoothing)| {
            OrderModel::new(NGramCountModel::build(corpus, order)?, smoothing)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if models.iter().all(|m| m.estimator.is_none()) {
        return Err(ModelError::AllVocabulariesEmpty);
    }
    Ok(ClassifierModel {
        config: config.clone(),
        labels: corpus.labels().to_vec(),
        models,
        trained_on: corpus.fingerprint(),
    })
}

impl ClassifierModel {
    fn from_parts(
        config: ModelConfig,
        labels: Vec<String>,
        counts: Vec<NGramCountModel>,
        trained_on: String,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let models = counts
            .into_iter()
            .zip(&config.smoothing)
            .map(|(c, &s)| OrderModel::new(c, s))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            config,
            labels,
            models,
            trained_on,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Content hash of the training corpus.
    pub fn trained_on(&self) -> &str {
        &self.trained_on
    }

    pub fn count_model(&self, order: NGramOrder) -> Option<&NGramCountModel> {
        self.models
            .iter()
            .find(|m| m.counts.order() == order)
            .map(|m| &m.counts)
    }

    pub fn count_models(&self) -> impl Iterator<Item = &NGramCountModel> {
        self.models.iter().map(|m| &m.counts)
    }

    /// Vocabulary size per configured order.
    pub fn vocab_sizes(&self) -> Vec<(NGramOrder, usize)> {
        self.models
            .iter()
            .map(|m| (m.counts.order(), m.counts.vocab().len()))
            .collect()
    }

    pub fn log_priors(&self) -> Vec<f64> {
        let first = &self.models[0].counts;
        self.labels
            .iter()
            .map(|l| {
                first
                    .class_prior(self.config.prior_mode, l)
                    .expect("all order models share the label list")
                    .ln()
            })
            .collect()
    }

    fn score_model(&self, model: &OrderModel, tokens: &[PhoneToken]) -> ScoreVector {
        let mut scores = ScoreVector::zeros(&self.labels);
        let Some(est) = &model.estimator else {
            return scores;
        };
        let vocab = model.counts.vocab();
        for window in tokens.windows(model.counts.order().get()) {
            let Some(idx) = vocab.index_of_window(window) else {
                continue;
            };
            for (class, s) in scores.log_scores.iter_mut().enumerate() {
                *s += est.prob(&model.counts, class, idx).ln();
            }
        }
        scores
    }

    /// Log-likelihood of `tokens` under one order, without the prior.
    pub fn score_order(
        &self,
        order: NGramOrder,
        tokens: &[PhoneToken],
    ) -> Result<ScoreVector, ModelError> {
        let model = self
            .models
            .iter()
            .find(|m| m.counts.order() == order)
            .ok_or(ModelError::UnknownOrder(order.get()))?;
        Ok(self.score_model(model, tokens))
    }

    /// Weighted combination using the configured weights.
    pub fn combine(&self, tokens: &[PhoneToken]) -> ScoreVector {
        self.combine_inner(tokens, &self.config.weights)
    }

    /// Weighted combination with caller-supplied weights, one per
    /// configured order. All-zero weights are allowed here and leave only
    /// the prior.
    pub fn combine_weighted(
        &self,
        tokens: &[PhoneToken],
        weights: &[f64],
    ) -> Result<ScoreVector, ModelError> {
        check_weights(weights, self.models.len())?;
        Ok(self.combine_inner(tokens, weights))
    }

    fn combine_inner(&self, tokens: &[PhoneToken], weights: &[f64]) -> ScoreVector {
        let mut total = ScoreVector {
            labels: self.labels.clone(),
            log_scores: self.log_priors(),
        };
        for (model, &w) in self.models.iter().zip(weights) {
            // Zero-weight orders are skipped outright so that a -inf
            // likelihood cannot turn into NaN.
            if w == 0.0 {
                continue;
            }
            let part = self.score_model(model, tokens);
            for (t, s) in total.log_scores.iter_mut().zip(part.log_scores) {
                *t += w * s;
            }
        }
        total
    }

    /// Most probable label over every trained class.
    pub fn predict(&self, tokens: &[PhoneToken]) -> Prediction {
        let scores = self.combine(tokens);
        Prediction {
            label: self.labels[scores.argmax()].clone(),
            scores,
        }
    }
}
