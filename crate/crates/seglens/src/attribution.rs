//! Per-token attribution scores and the built-in reference classifier.
//!
//! The toolkit is model-agnostic: attribution records can be ingested from
//! any external explainer as long as their token sequences match the corpus
//! normalization. For self-contained runs, a seeded logistic-regression
//! reference classifier over binary bag-of-words presence features is
//! provided, together with two attribution methods that agree exactly on
//! such models:
//!
//! * linear attribution splits each known token's weight evenly across its
//!   occurrences;
//! * occlusion attribution removes all occurrences of a token and measures
//!   the change in the prediction logit, again split evenly.
//!
//! Both satisfy the completeness identity: the scores of a message sum to
//! its prediction logit minus the model bias.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedCorpus;
use crate::{Result, SeglensError};

/// Per-occurrence attribution scores for one message.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttributionRecord {
    /// Message id.
    pub id: String,
    /// Normalized tokens, aligned 1:1 with `scores`.
    pub tokens: Vec<String>,
    /// One signed score per token occurrence.
    pub scores: Vec<f64>,
    /// The model's probability of class 1 for this message.
    pub prob: f64,
}

/// Attribution records for a corpus, stored in corpus order.
#[derive(Debug, Clone, Default)]
pub struct AttributionSet {
    records: Vec<AttributionRecord>,
    index: HashMap<String, usize>,
}

impl AttributionSet {
    /// Build from records, rejecting duplicate ids.
    pub fn from_records(records: Vec<AttributionRecord>) -> Result<AttributionSet> {
        let mut index = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(SeglensError::DataMismatch(format!(
                    "duplicate attribution id {:?}",
                    r.id
                )));
            }
        }
        Ok(AttributionSet { records, index })
    }

    /// Records in corpus order.
    #[must_use]
    pub fn records(&self) -> &[AttributionRecord] {
        &self.records
    }

    /// Number of records.
    #[must_use]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when the set holds no records.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Look up a record by message id.
    #[must_use]
    pub fn get(&self, id: &str) -> Option<&AttributionRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }
}

/// One thresholded prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    /// Message id.
    pub id: String,
    /// Probability of class 1.
    pub prob: f64,
    /// Hard class decision, 0 or 1.
    pub pred: u8,
}

/// Predictions for a corpus, stored in corpus order.
#[derive(Debug, Clone, Default)]
pub struct PredictionSet {
    records: Vec<Prediction>,
    index: HashMap<String, usize>,
}

impl PredictionSet {
    /// Build from predictions, rejecting duplicate ids.
    pub fn from_records(records: Vec<Prediction>) -> Result<PredictionSet> {
        let mut index = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(SeglensError::DataMismatch(format!(
                    "duplicate prediction id {:?}",
                    r.id
                )));
            }
        }
        Ok(PredictionSet { records, index })
    }

    /// Predictions in corpus order.
    #[must_use]
    pub fn records(&self) -> &[Prediction] {
        &self.records
    }

    /// Look up a prediction by message id.
    #[must_use]
    pub fn get(&self, id: &str) -> Option<&Prediction> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Number of predictions.
    #[must_use]
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when the set holds no predictions.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Anything that can score a tokenized message with a class-1 probability.
pub trait Predictor {
    /// Probability of class 1 for the given tokens.
    fn predict_prob(&self, tokens: &[String]) -> f64;
}

/// Hyperparameters for the reference classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainParams {
    /// Gradient-descent step size.
    pub learning_rate: f64,
    /// Number of full-batch epochs.
    pub epochs: usize,
    /// L2 penalty on the weights (the bias is not penalized).
    pub l2: f64,
    /// Seed for weight initialization; training is bit-deterministic given
    /// the same corpus and seed.
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            learning_rate: 0.5,
            epochs: 200,
            l2: 1e-4,
            seed: 7,
        }
    }
}

/// A logistic-regression model over binary bag-of-words presence features.
#[derive(Debug, Clone)]
pub struct LinearModel {
    vocab: Vec<String>,
    vocab_index: HashMap<String, usize>,
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    vocab: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    threshold: f64,
}

impl LinearModel {
    /// Build a model from explicit parts. `vocab` and `weights` must align.
    pub fn from_parts(
        vocab: Vec<String>,
        weights: Vec<f64>,
        bias: f64,
        threshold: f64,
    ) -> Result<LinearModel> {
        if vocab.len() != weights.len() {
            return Err(SeglensError::InvalidConfig(format!(
                "model has {} vocabulary entries but {} weights",
                vocab.len(),
                weights.len()
            )));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(SeglensError::InvalidConfig(format!(
                "decision threshold {threshold} is outside [0, 1]"
            )));
        }
        let mut vocab_index = HashMap::new();
        for (i, token) in vocab.iter().enumerate() {
            if vocab_index.insert(token.clone(), i).is_some() {
                return Err(SeglensError::InvalidConfig(format!(
                    "duplicate vocabulary token {token:?}"
                )));
            }
        }
        Ok(LinearModel {
            vocab,
            vocab_index,
            weights,
            bias,
            threshold,
        })
    }

    /// Vocabulary in feature order.
    #[must_use]
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Weight vector aligned with [`Self::vocab`].
    #[must_use]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Intercept term.
    #[must_use]
    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Decision threshold on the class-1 probability.
    #[must_use]
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// The weight for a token, if it is in the vocabulary.
    #[must_use]
    pub fn weight(&self, token: &str) -> Option<f64> {
        self.vocab_index.get(token).map(|&i| self.weights[i])
    }

    /// Prediction logit: bias plus the weight of every distinct known token.
    /// Repeated occurrences count once (presence features); unknown tokens
    /// contribute nothing.
    #[must_use]
    pub fn logit(&self, tokens: &[String]) -> f64 {
        let distinct: BTreeSet<&String> = tokens.iter().collect();
        let mut z = self.bias;
        for token in distinct {
            if let Some(&i) = self.vocab_index.get(token.as_str()) {
                z += self.weights[i];
            }
        }
        z
    }

    /// Probability of class 1.
    #[must_use]
    pub fn predict(&self, tokens: &[String]) -> f64 {
        sigmoid(self.logit(tokens))
    }

    /// Hard decision: 1 when the probability reaches the threshold.
    #[must_use]
    pub fn decide(&self, tokens: &[String]) -> u8 {
        u8::from(self.predict(tokens) >= self.threshold)
    }

    /// Write the model as a single JSON document.
    pub fn save(&self, path: &Path) -> Result<()> {
        let raw = RawModel {
            vocab: self.vocab.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
            threshold: self.threshold,
        };
        let json = serde_json::to_string_pretty(&raw)
            .map_err(|e| SeglensError::Internal(format!("serialize model: {e}")))?;
        std::fs::write(path, json).map_err(|source| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source,
        })
    }

    /// Read a model written by [`Self::save`].
    pub fn load(path: &Path) -> Result<LinearModel> {
        let text = std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        let raw: RawModel = serde_json::from_str(&text).map_err(|e| SeglensError::InvalidInput {
            path: path.display().to_string(),
            line: 1,
            message: format!("malformed model file: {e}"),
        })?;
        LinearModel::from_parts(raw.vocab, raw.weights, raw.bias, raw.threshold)
    }
}

impl Predictor for LinearModel {
    fn predict_prob(&self, tokens: &[String]) -> f64 {
        self.predict(tokens)
    }
}

/// Numerically stable logistic function.
#[must_use]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Train the reference classifier with full-batch gradient descent.
///
/// Features are binary presence indicators over the corpus vocabulary
/// (distinct tokens, sorted). Initial weights are drawn from a seeded
/// uniform distribution, so identical corpora and seeds give bit-identical
/// models. A corpus that is empty or contains a single class is rejected.
pub fn train_reference_classifier(
    corpus: &TokenizedCorpus,
    params: &TrainParams,
    threshold: f64,
) -> Result<LinearModel> {
    if corpus.is_empty() {
        return Err(SeglensError::InvalidConfig(
            "cannot train on an empty corpus".to_string(),
        ));
    }
    let has_pos = corpus.messages().iter().any(|m| m.label == 1);
    let has_neg = corpus.messages().iter().any(|m| m.label == 0);
    if !has_pos || !has_neg {
        return Err(SeglensError::InvalidConfig(
            "training corpus must contain both classes".to_string(),
        ));
    }

    let vocab: Vec<String> = {
        let set: BTreeSet<&String> = corpus
            .messages()
            .iter()
            .flat_map(|m| m.tokens.iter())
            .collect();
        set.into_iter().cloned().collect()
    };
    let vocab_index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    // Per-message distinct feature indices, in corpus order.
    let features: Vec<Vec<usize>> = corpus
        .messages()
        .iter()
        .map(|m| {
            let distinct: BTreeSet<&String> = m.tokens.iter().collect();
            distinct.iter().map(|t| vocab_index[t.as_str()]).collect()
        })
        .collect();
    let labels: Vec<f64> = corpus
        .messages()
        .iter()
        .map(|m| f64::from(m.label))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Uniform::new_inclusive(-0.01, 0.01);
    let mut weights: Vec<f64> = (0..vocab.len()).map(|_| init.sample(&mut rng)).collect();
    let mut bias = 0.0f64;
    let n = corpus.len() as f64;

    let mut grad_w = vec![0.0f64; vocab.len()];
    for _ in 0..params.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0f64;
        for (feats, &y) in features.iter().zip(&labels) {
            let mut z = bias;
            for &i in feats {
                z += weights[i];
            }
            let residual = sigmoid(z) - y;
            for &i in feats {
                grad_w[i] += residual;
            }
            grad_b += residual;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= params.learning_rate * (g / n + params.l2 * *w);
        }
        bias -= params.learning_rate * (grad_b / n);
    }

    LinearModel::from_parts(vocab, weights, bias, threshold)
}

/// Linear attribution: each occurrence of a known token scores its weight
/// divided by the token's occurrence count in the message; unknown tokens
/// score zero. The scores sum to `logit - bias`.
#[must_use]
pub fn linear_attribution(model: &LinearModel, id: &str, tokens: &[String]) -> AttributionRecord {
    let mut counts: HashMap<&str, f64> = HashMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0.0) += 1.0;
    }
    let scores = tokens
        .iter()
        .map(|token| match model.weight(token) {
            Some(w) => w / counts[token.as_str()],
            None => 0.0,
        })
        .collect();
    AttributionRecord {
        id: id.to_string(),
        tokens: tokens.to_vec(),
        scores,
        prob: model.predict(tokens),
    }
}

/// Occlusion attribution: remove every occurrence of a token, measure the
/// drop in the prediction logit, and split it evenly across the token's
/// occurrences. Works with any [`Predictor`]; probabilities of exactly 0 or
/// 1 have no finite logit and are rejected.
pub fn occlusion_attribution(
    model: &impl Predictor,
    id: &str,
    tokens: &[String],
) -> Result<AttributionRecord> {
    let prob = model.predict_prob(tokens);
    let base = finite_logit(prob)?;
    let mut counts: HashMap<&str, f64> = HashMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0.0) += 1.0;
    }
    let mut deltas: HashMap<&str, f64> = HashMap::new();
    for token in counts.keys() {
        let reduced: Vec<String> = tokens.iter().filter(|t| t.as_str() != *token).cloned().collect();
        let without = finite_logit(model.predict_prob(&reduced))?;
        deltas.insert(token, base - without);
    }
    let scores = tokens
        .iter()
        .map(|t| deltas[t.as_str()] / counts[t.as_str()])
        .collect();
    Ok(AttributionRecord {
        id: id.to_string(),
        tokens: tokens.to_vec(),
        scores,
        prob,
    })
}

fn finite_logit(prob: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(SeglensError::Undefined(format!(
            "predictor returned probability {prob} outside [0, 1]"
        )));
    }
    let z = (prob / (1.0 - prob)).ln();
    if z.is_finite() {
        Ok(z)
    } else {
        Err(SeglensError::Undefined(format!(
            "probability {prob} has no finite logit"
        )))
    }
}

/// Run linear attribution over a whole corpus, in corpus order.
#[must_use]
pub fn attribute_corpus(model: &LinearModel, corpus: &TokenizedCorpus) -> AttributionSet {
    let records: Vec<AttributionRecord> = corpus
        .messages()
        .par_iter()
        .map(|m| linear_attribution(model, &m.id, &m.tokens))
        .collect();
    AttributionSet::from_records(records).expect("corpus ids are unique")
}

/// Hard predictions for a whole corpus, in corpus order.
#[must_use]
pub fn predict_corpus(model: &LinearModel, corpus: &TokenizedCorpus) -> PredictionSet {
    let records: Vec<Prediction> = corpus
        .messages()
        .iter()
        .map(|m| Prediction {
            id: m.id.clone(),
            prob: model.predict(&m.tokens),
            pred: model.decide(&m.tokens),
        })
        .collect();
    PredictionSet::from_records(records).expect("corpus ids are unique")
}

/// Read attribution records from a JSON-lines file and validate them against
/// the corpus: every id must exist, token sequences must equal the corpus
/// normalization, score lists must align with tokens, scores must be finite,
/// and probabilities must lie in [0, 1]. Records are reordered into corpus
/// order. The file may cover a subset of the corpus; coverage is enforced by
/// the aggregation stage for the messages it actually analyzes.
pub fn load_attributions(path: &Path, corpus: &TokenizedCorpus) -> Result<AttributionSet> {
    let file = std::fs::File::open(path).map_err(|source| SeglensError::ReadInput {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut by_id: HashMap<String, AttributionRecord> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: AttributionRecord =
            serde_json::from_str(&line).map_err(|e| SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: format!("malformed attribution record: {e}"),
            })?;
        let invalid = |message: String| SeglensError::InvalidInput {
            path: path.display().to_string(),
            line: lineno,
            message,
        };
        let known = corpus
            .get(&record.id)
            .ok_or_else(|| invalid(format!("id {:?} is not in the corpus", record.id)))?;
        if record.tokens != known.tokens {
            return Err(invalid(format!(
                "tokens for id {:?} do not match the corpus normalization",
                record.id
            )));
        }
        if record.scores.len() != record.tokens.len() {
            return Err(invalid(format!(
                "id {:?} has {} scores for {} tokens",
                record.id,
                record.scores.len(),
                record.tokens.len()
            )));
        }
        if record.scores.iter().any(|s| !s.is_finite()) {
            return Err(invalid(format!("id {:?} has a non-finite score", record.id)));
        }
        if !(0.0..=1.0).contains(&record.prob) {
            return Err(invalid(format!(
                "id {:?} has probability {} outside [0, 1]",
                record.id, record.prob
            )));
        }
        if by_id.insert(record.id.clone(), record).is_some() {
            return Err(SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: "duplicate attribution id".to_string(),
            });
        }
    }
    let mut records = Vec::with_capacity(by_id.len());
    for message in corpus.messages() {
        if let Some(record) = by_id.remove(&message.id) {
            records.push(record);
        }
    }
    AttributionSet::from_records(records)
}

/// Write attribution records as JSON lines, one record per line.
pub fn write_attributions(path: &Path, set: &AttributionSet) -> Result<()> {
    let mut out = Vec::new();
    for record in set.records() {
        let line = serde_json::to_string(record)
            .map_err(|e| SeglensError::Internal(format!("serialize attribution: {e}")))?;
        out.push(line);
    }
    write_lines(path, &out)
}

#[derive(Serialize, Deserialize)]
struct RawPrediction {
    id: String,
    prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pred: Option<u8>,
}

/// Read predictions from a JSON-lines file of `{"id", "prob", "pred"?}`
/// records. An explicit `pred` wins; otherwise the hard decision is derived
/// as `prob >= threshold`. Ids must exist in the corpus and be unique.
pub fn load_predictions(
    path: &Path,
    corpus: &TokenizedCorpus,
    threshold: f64,
) -> Result<PredictionSet> {
    let file = std::fs::File::open(path).map_err(|source| SeglensError::ReadInput {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut by_id: HashMap<String, Prediction> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPrediction =
            serde_json::from_str(&line).map_err(|e| SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: format!("malformed prediction record: {e}"),
            })?;
        let invalid = |message: String| SeglensError::InvalidInput {
            path: path.display().to_string(),
            line: lineno,
            message,
        };
        if corpus.get(&raw.id).is_none() {
            return Err(invalid(format!("id {:?} is not in the corpus", raw.id)));
        }
        if !(0.0..=1.0).contains(&raw.prob) {
            return Err(invalid(format!(
                "id {:?} has probability {} outside [0, 1]",
                raw.id, raw.prob
            )));
        }
        let pred = match raw.pred {
            Some(p) if p <= 1 => p,
            Some(p) => return Err(invalid(format!("id {:?} has pred {p}, expected 0 or 1", raw.id))),
            None => u8::from(raw.prob >= threshold),
        };
        let record = Prediction {
            id: raw.id,
            prob: raw.prob,
            pred,
        };
        if by_id.insert(record.id.clone(), record).is_some() {
            return Err(SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: lineno,
                message: "duplicate prediction id".to_string(),
            });
        }
    }
    let mut records = Vec::with_capacity(by_id.len());
    for message in corpus.messages() {
        if let Some(record) = by_id.remove(&message.id) {
            records.push(record);
        }
    }
    PredictionSet::from_records(records)
}

/// Write predictions as JSON lines.
pub fn write_predictions(path: &Path, set: &PredictionSet) -> Result<()> {
    let mut out = Vec::new();
    for record in set.records() {
        let raw = RawPrediction {
            id: record.id.clone(),
            prob: record.prob,
            pred: Some(record.pred),
        };
        let line = serde_json::to_string(&raw)
            .map_err(|e| SeglensError::Internal(format!("serialize prediction: {e}")))?;
        out.push(line);
    }
    write_lines(path, &out)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = std::io::BufWriter::new(file);
    for line in lines {
        writeln!(writer, "{line}").map_err(|source| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source,
        })?;
    }
    writer.flush().map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}
