//! Latent Dirichlet allocation by collapsed Gibbs sampling.
//!
//! Used to segment a corpus by inferred topic when no trustworthy metadata
//! field exists. Sampling is deterministic given the corpus, parameters, and
//! seed: documents and positions are visited in order and all randomness
//! comes from one seeded generator.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::TokenizedCorpus;
use crate::segmentation::SegmentAssignment;
use crate::{Result, SeglensError};

/// Sampler parameters.
#[derive(Debug, Clone)]
pub struct LdaParams {
    /// Number of topics (at least 2).
    pub topics: usize,
    /// Document-topic smoothing; `None` selects the default `50 / topics`.
    pub alpha: Option<f64>,
    /// Topic-word smoothing.
    pub beta: f64,
    /// Number of full Gibbs sweeps over the corpus.
    pub iterations: usize,
    /// Seed for initialization and sampling.
    pub seed: u64,
    /// Re-derive all count tables from the assignments after every sweep and
    /// fail on any disagreement. Costly; intended for tests.
    pub check_counts_every_sweep: bool,
}

impl Default for LdaParams {
    fn default() -> Self {
        LdaParams {
            topics: 3,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            seed: 7,
            check_counts_every_sweep: false,
        }
    }
}

/// A fitted topic model: count tables plus the final token-topic
/// assignments.
#[derive(Debug, Clone)]
pub struct LdaModel {
    topics: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_totals: Vec<u32>,
}

/// Fit a topic model on the corpus. The vocabulary is the sorted set of
/// corpus tokens; every token occurrence receives a topic. Messages with no
/// tokens participate with empty assignments.
pub fn lda_fit(corpus: &TokenizedCorpus, params: &LdaParams) -> Result<LdaModel> {
    if params.topics < 2 {
        return Err(SeglensError::InvalidConfig(format!(
            "topic count must be at least 2, got {}",
            params.topics
        )));
    }
    if corpus.is_empty() {
        return Err(SeglensError::InvalidConfig(
            "cannot fit topics on an empty corpus".to_string(),
        ));
    }
    if params.iterations == 0 {
        return Err(SeglensError::InvalidConfig(
            "iteration count must be positive".to_string(),
        ));
    }
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !positive(params.beta) || params.alpha.is_some_and(|a| !positive(a)) {
        return Err(SeglensError::InvalidConfig(
            "smoothing priors must be positive".to_string(),
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
    if vocab.is_empty() {
        return Err(SeglensError::InvalidConfig(
            "corpus has no tokens to model".to_string(),
        ));
    }
    let vocab_index: HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let k = params.topics;
    let v = vocab.len();
    let alpha = params.alpha.unwrap_or(50.0 / k as f64);
    let beta = params.beta;

    let docs: Vec<Vec<u32>> = corpus
        .messages()
        .iter()
        .map(|m| m.tokens.iter().map(|t| vocab_index[t.as_str()] as u32).collect())
        .collect();
    let doc_ids: Vec<String> = corpus.messages().iter().map(|m| m.id.clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut assignments: Vec<Vec<u32>> = Vec::with_capacity(docs.len());
    let mut doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut topic_word = vec![vec![0u32; v]; k];
    let mut topic_totals = vec![0u32; k];

    for (d, doc) in docs.iter().enumerate() {
        let mut z_doc = Vec::with_capacity(doc.len());
        for &w in doc {
            let z = rng.gen_range(0..k);
            z_doc.push(z as u32);
            doc_topic[d][z] += 1;
            topic_word[z][w as usize] += 1;
            topic_totals[z] += 1;
        }
        assignments.push(z_doc);
    }

    let mut weights = vec![0.0f64; k];
    for sweep in 0..params.iterations {
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let w = w as usize;
                let old = assignments[d][i] as usize;
                doc_topic[d][old] -= 1;
                topic_word[old][w] -= 1;
                topic_totals[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (f64::from(doc_topic[d][t]) + alpha)
                        * (f64::from(topic_word[t][w]) + beta)
                        / (f64::from(topic_totals[t]) + v as f64 * beta);
                    weights[t] = p;
                    total += p;
                }
                let mut u = rng.gen::<f64>() * total;
                let mut new = k - 1;
                for (t, &p) in weights.iter().enumerate() {
                    if u < p {
                        new = t;
                        break;
                    }
                    u -= p;
                }

                assignments[d][i] = new as u32;
                doc_topic[d][new] += 1;
                topic_word[new][w] += 1;
                topic_totals[new] += 1;
            }
        }
        if params.check_counts_every_sweep {
            check_counts(&docs, &assignments, &doc_topic, &topic_word, &topic_totals, k, v)
                .map_err(|e| {
                    SeglensError::Internal(format!("count tables diverged after sweep {sweep}: {e}"))
                })?;
        }
    }

    Ok(LdaModel {
        topics: k,
        alpha,
        beta,
        iterations: params.iterations,
        seed: params.seed,
        vocab,
        doc_ids,
        docs,
        assignments,
        doc_topic,
        topic_word,
        topic_totals,
    })
}

fn check_counts(
    docs: &[Vec<u32>],
    assignments: &[Vec<u32>],
    doc_topic: &[Vec<u32>],
    topic_word: &[Vec<u32>],
    topic_totals: &[u32],
    k: usize,
    v: usize,
) -> std::result::Result<(), String> {
    let mut want_doc_topic = vec![vec![0u32; k]; docs.len()];
    let mut want_topic_word = vec![vec![0u32; v]; k];
    let mut want_topic_totals = vec![0u32; k];
    for (d, doc) in docs.iter().enumerate() {
        if doc.len() != assignments[d].len() {
            return Err(format!("document {d} has {} tokens but {} assignments", doc.len(), assignments[d].len()));
        }
        for (&w, &z) in doc.iter().zip(&assignments[d]) {
            want_doc_topic[d][z as usize] += 1;
            want_topic_word[z as usize][w as usize] += 1;
            want_topic_totals[z as usize] += 1;
        }
    }
    if want_doc_topic != doc_topic {
        return Err("document-topic counts disagree with assignments".to_string());
    }
    if want_topic_word != topic_word {
        return Err("topic-word counts disagree with assignments".to_string());
    }
    if want_topic_totals != topic_totals {
        return Err("topic totals disagree with assignments".to_string());
    }
    let tokens: u32 = docs.iter().map(|d| d.len() as u32).sum();
    let total: u32 = topic_totals.iter().sum();
    if tokens != total {
        return Err(format!("{total} assigned tokens for {tokens} corpus tokens"));
    }
    Ok(())
}

impl LdaModel {
    /// Number of topics.
    #[must_use]
    pub fn topics(&self) -> usize {
        self.topics
    }

    /// Vocabulary in feature order.
    #[must_use]
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Per-document topic counts, in corpus order.
    #[must_use]
    pub fn doc_topic_counts(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    /// Verify that all count tables agree with the stored assignments.
    pub fn verify_counts(&self) -> Result<()> {
        check_counts(
            &self.docs,
            &self.assignments,
            &self.doc_topic,
            &self.topic_word,
            &self.topic_totals,
            self.topics,
            self.vocab.len(),
        )
        .map_err(SeglensError::Internal)
    }

    /// Assign every message to its most frequent topic (`topic_0` ...).
    /// Ties, including zero-token messages, resolve to the smallest topic
    /// index. Display order is first appearance in corpus order — the same
    /// order an `id,segment` CSV round trip reconstructs, so a reloaded
    /// assignment is interchangeable with a fresh one. A topic that attracts
    /// no documents is absent.
    #[must_use]
    pub fn hard_assignment(&self) -> SegmentAssignment {
        let mut order: Vec<String> = Vec::new();
        let mut labels = HashMap::new();
        for (d, id) in self.doc_ids.iter().enumerate() {
            let counts = &self.doc_topic[d];
            let mut best = 0usize;
            for (t, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = t;
                }
            }
            let label = format!("topic_{best}");
            if !order.contains(&label) {
                order.push(label.clone());
            }
            labels.insert(id.clone(), label);
        }
        SegmentAssignment::new("lda", labels, order).expect("labels drawn from order")
    }

    /// The `n` highest-probability words of a topic under the smoothed
    /// topic-word distribution, ties broken lexicographically.
    #[must_use]
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(String, f64)> {
        let v = self.vocab.len() as f64;
        let denom = f64::from(self.topic_totals[topic]) + v * self.beta;
        let mut scored: Vec<(String, f64)> = self
            .vocab
            .iter()
            .enumerate()
            .map(|(w, token)| {
                let p = (f64::from(self.topic_word[topic][w]) + self.beta) / denom;
                (token.clone(), p)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        scored.truncate(n);
        scored
    }

    /// Write the model (priors, seed, vocabulary, count tables, hard topic
    /// per document) as a JSON document.
    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct RawLda<'a> {
            topics: usize,
            alpha: f64,
            beta: f64,
            iterations: usize,
            seed: u64,
            vocab: &'a [String],
            doc_ids: &'a [String],
            doc_topic: &'a [Vec<u32>],
            topic_word: &'a [Vec<u32>],
            topic_totals: &'a [u32],
        }
        let raw = RawLda {
            topics: self.topics,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            seed: self.seed,
            vocab: &self.vocab,
            doc_ids: &self.doc_ids,
            doc_topic: &self.doc_topic,
            topic_word: &self.topic_word,
            topic_totals: &self.topic_totals,
        };
        let json = serde_json::to_string_pretty(&raw)
            .map_err(|e| SeglensError::Internal(format!("serialize topic model: {e}")))?;
        std::fs::write(path, json).map_err(|source| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenizedMessage;
    use std::collections::BTreeMap;

    /// Three disjoint vocabularies, `n` documents per theme.
    fn themed_corpus(n: usize, seed: u64) -> TokenizedCorpus {
        let themes: [&[&str]; 3] = [
            &["pasta", "pizza", "menu", "waiter", "dinner", "sauce"],
            &["bed", "lobby", "suite", "pillow", "checkin", "towel"],
            &["salon", "nails", "stylist", "spa", "manicure", "haircut"],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut messages = Vec::new();
        for (theme, words) in themes.iter().enumerate() {
            for i in 0..n {
                let len = rng.gen_range(8..20);
                let tokens = (0..len)
                    .map(|_| words[rng.gen_range(0..words.len())].to_string())
                    .collect();
                let mut metadata = BTreeMap::new();
                metadata.insert("theme".to_string(), format!("theme_{theme}"));
                messages.push(TokenizedMessage {
                    id: format!("t{theme}_m{i}"),
                    label: 0,
                    metadata,
                    tokens,
                });
            }
        }
        TokenizedCorpus::from_messages(messages).expect("corpus")
    }

    fn purity(corpus: &TokenizedCorpus, assignment: &SegmentAssignment) -> f64 {
        let mut cluster_theme: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
        for m in corpus.messages() {
            let cluster = assignment.get(&m.id).expect("assigned");
            let theme = m.metadata.get("theme").expect("theme");
            *cluster_theme
                .entry(cluster)
                .or_default()
                .entry(theme.as_str())
                .or_insert(0) += 1;
        }
        let majority: usize = cluster_theme
            .values()
            .map(|counts| counts.values().copied().max().unwrap_or(0))
            .sum();
        majority as f64 / corpus.len() as f64
    }

    #[test]
    fn fit_is_deterministic_given_a_seed() {
        let corpus = themed_corpus(5, 11);
        let params = LdaParams {
            iterations: 50,
            ..LdaParams::default()
        };
        let a = lda_fit(&corpus, &params).expect("fit");
        let b = lda_fit(&corpus, &params).expect("fit");
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.doc_topic, b.doc_topic);
        let c = lda_fit(
            &corpus,
            &LdaParams {
                seed: 99,
                iterations: 50,
                ..LdaParams::default()
            },
        )
        .expect("fit");
        assert_ne!(a.assignments, c.assignments);
    }

    #[test]
    fn count_tables_stay_consistent_across_sweeps() {
        let corpus = themed_corpus(4, 3);
        let params = LdaParams {
            iterations: 20,
            check_counts_every_sweep: true,
            ..LdaParams::default()
        };
        let model = lda_fit(&corpus, &params).expect("fit with per-sweep checks");
        model.verify_counts().expect("final counts");
    }

    #[test]
    fn disjoint_themes_are_recovered() {
        let corpus = themed_corpus(10, 5);
        let params = LdaParams {
            iterations: 200,
            ..LdaParams::default()
        };
        let model = lda_fit(&corpus, &params).expect("fit");
        let assignment = model.hard_assignment();
        assert!(
            purity(&corpus, &assignment) >= 0.9,
            "purity {}",
            purity(&corpus, &assignment)
        );
    }

    #[test]
    fn hard_assignment_breaks_ties_toward_the_smallest_topic() {
        let corpus = TokenizedCorpus::from_messages(vec![
            TokenizedMessage {
                id: "empty".to_string(),
                label: 0,
                metadata: BTreeMap::new(),
                tokens: vec![],
            },
            TokenizedMessage {
                id: "full".to_string(),
                label: 0,
                metadata: BTreeMap::new(),
                tokens: vec!["a".to_string(), "b".to_string()],
            },
        ])
        .expect("corpus");
        let model = lda_fit(
            &corpus,
            &LdaParams {
                iterations: 5,
                ..LdaParams::default()
            },
        )
        .expect("fit");
        let assignment = model.hard_assignment();
        // A zero-token document has all-zero counts: every topic ties, so
        // the smallest index wins.
        assert_eq!(assignment.get("empty"), Some("topic_0"));
        // Display order is first appearance: "empty" comes first in the
        // corpus, so topic_0 leads; only topics that attracted a document
        // are listed.
        assert_eq!(assignment.segments().first().map(String::as_str), Some("topic_0"));
        assert!(assignment.segments().len() <= 2);
        assignment.validate_against(&corpus).expect("partition");
    }

    #[test]
    fn hard_assignment_survives_a_csv_round_trip() {
        // The pipeline reloads a cached assignment from its CSV; the
        // reloaded object must be interchangeable with the fresh one,
        // display order included.
        let corpus = themed_corpus(30, 5);
        let model = lda_fit(
            &corpus,
            &LdaParams {
                alpha: Some(0.5),
                iterations: 30,
                ..LdaParams::default()
            },
        )
        .expect("fit");
        let assignment = model.hard_assignment();
        let dir = tempfile::tempdir().expect("dir");
        let path = dir.path().join("lda.csv");
        assignment.write_csv(&path, &corpus).expect("write");
        let reloaded = SegmentAssignment::read_csv(&path, "lda", &corpus).expect("read");
        assert_eq!(assignment.segments(), reloaded.segments());
        for message in corpus.messages() {
            assert_eq!(assignment.get(&message.id), reloaded.get(&message.id));
        }
    }

    #[test]
    fn top_words_reflect_topic_content() {
        let corpus = themed_corpus(30, 5);
        // A sharp document-topic prior keeps the topic-word tables crisp on
        // short documents; the 50/K default is tuned for longer ones.
        let model = lda_fit(
            &corpus,
            &LdaParams {
                alpha: Some(0.5),
                iterations: 200,
                ..LdaParams::default()
            },
        )
        .expect("fit");
        let themes: [&[&str]; 3] = [
            &["pasta", "pizza", "menu", "waiter", "dinner", "sauce"],
            &["bed", "lobby", "suite", "pillow", "checkin", "towel"],
            &["salon", "nails", "stylist", "spa", "manicure", "haircut"],
        ];
        for t in 0..3 {
            let top: Vec<String> = model.top_words(t, 3).into_iter().map(|(w, _)| w).collect();
            // Each topic's top words must all come from a single theme.
            let matched = themes
                .iter()
                .any(|theme| top.iter().all(|w| theme.contains(&w.as_str())));
            assert!(matched, "topic {t} mixes themes: {top:?}");
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let corpus = themed_corpus(2, 1);
        let base = LdaParams::default();
        for (params, needle) in [
            (LdaParams { topics: 1, ..base.clone() }, "at least 2"),
            (LdaParams { iterations: 0, ..base.clone() }, "positive"),
            (LdaParams { beta: 0.0, ..base.clone() }, "smoothing"),
            (LdaParams { alpha: Some(-1.0), ..base.clone() }, "smoothing"),
        ] {
            let err = lda_fit(&corpus, &params).expect_err("invalid");
            assert!(err.to_string().contains(needle), "got: {err}");
        }
        let empty = TokenizedCorpus::default();
        let err = lda_fit(&empty, &base).expect_err("empty");
        assert!(err.to_string().contains("empty corpus"));
    }

    #[test]
    fn model_export_writes_json() {
        let corpus = themed_corpus(2, 1);
        let model = lda_fit(
            &corpus,
            &LdaParams {
                iterations: 5,
                ..LdaParams::default()
            },
        )
        .expect("fit");
        let dir = tempfile::tempdir().expect("dir");
        let path = dir.path().join("topics.json");
        model.save(&path).expect("save");
        let text = std::fs::read_to_string(&path).expect("read");
        let value: serde_json::Value = serde_json::from_str(&text).expect("json");
        assert_eq!(value["topics"], 3);
        assert_eq!(value["seed"], 7);
        assert!(value["vocab"].as_array().expect("vocab").len() >= 6);
    }
}
