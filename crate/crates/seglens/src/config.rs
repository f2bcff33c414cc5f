//! Run configuration: one JSON file describing inputs, parameters, and the
//! output directory, with every key overridable from the command line via
//! dotted-path `--set` flags.
//!
//! Relative paths in the file are resolved against the config file's own
//! directory, so a config can travel with its data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::{MessageFilter, RankingStatistic};
use crate::word_grouping::{DEFAULT_MEANING_EDGES, DEFAULT_SIGNIFICANT, DEFAULT_STRONG};
use crate::{Result, SeglensError};

/// Latent-topic segmentation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaConfig {
    /// Number of topics.
    #[serde(default = "default_topics")]
    pub topics: usize,
    /// Document-topic smoothing; `null` selects `50 / topics`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Topic-word smoothing.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Number of full Gibbs sweeps.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_topics() -> usize {
    3
}
fn default_beta() -> f64 {
    0.01
}
fn default_iterations() -> usize {
    500
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: default_topics(),
            alpha: None,
            beta: default_beta(),
            iterations: default_iterations(),
        }
    }
}

/// Which partitioning schemes to compute and with what parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Metadata field used for the metadata scheme; `null` disables it.
    #[serde(default = "default_metadata_field")]
    pub metadata_field: Option<String>,
    /// Token-count boundaries for length buckets.
    #[serde(default = "default_length_boundaries")]
    pub length_boundaries: Vec<usize>,
    /// Out-of-vocabulary-fraction boundaries.
    #[serde(default = "default_oov_boundaries")]
    pub oov_boundaries: Vec<f64>,
    /// Latent-topic parameters.
    #[serde(default)]
    pub lda: LdaConfig,
}

fn default_metadata_field() -> Option<String> {
    Some("topic".to_string())
}
fn default_length_boundaries() -> Vec<usize> {
    vec![20, 50, 80]
}
fn default_oov_boundaries() -> Vec<f64> {
    vec![0.5]
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            metadata_field: default_metadata_field(),
            length_boundaries: default_length_boundaries(),
            oov_boundaries: default_oov_boundaries(),
            lda: LdaConfig::default(),
        }
    }
}

/// Token-importance aggregation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationConfig {
    /// Minimum within-segment document frequency as a fraction of segment
    /// size.
    #[serde(default = "default_min_freq_fraction")]
    pub min_freq_fraction: f64,
    /// How many top tokens per table feed the report and scans.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Ranking statistic for table ordering.
    #[serde(default)]
    pub ranking: RankingStatistic,
    /// Which messages participate in aggregation.
    #[serde(default)]
    pub message_filter: MessageFilter,
    /// The scheme whose tables drive the report: `metadata`, `length`,
    /// `oov`, or `lda`.
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

fn default_min_freq_fraction() -> f64 {
    1e-4
}
fn default_top_k() -> usize {
    100
}
fn default_scheme() -> String {
    "metadata".to_string()
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig {
            min_freq_fraction: default_min_freq_fraction(),
            top_k: default_top_k(),
            ranking: RankingStatistic::default(),
            message_filter: MessageFilter::default(),
            scheme: default_scheme(),
        }
    }
}

/// Anchor word lists. Empty lists select the bundled (male/female) or
/// derived (meaning) defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorsConfig {
    /// First bias anchor set; empty selects the bundled male list.
    #[serde(default)]
    pub male: Vec<String>,
    /// Second bias anchor set; empty selects the bundled female list.
    #[serde(default)]
    pub female: Vec<String>,
    /// Meaning anchors toward class 1; empty derives them from the
    /// full-data class-1 table.
    #[serde(default)]
    pub meaning_class1: Vec<String>,
    /// Meaning anchors toward class 0; empty derives them from the
    /// full-data class-0 table.
    #[serde(default)]
    pub meaning_class0: Vec<String>,
    /// How many top full-data tokens make up each derived meaning anchor
    /// set.
    #[serde(default = "default_meaning_anchor_count")]
    pub meaning_anchor_count: usize,
}

fn default_meaning_anchor_count() -> usize {
    10
}

impl Default for AnchorsConfig {
    fn default() -> Self {
        AnchorsConfig {
            male: Vec::new(),
            female: Vec::new(),
            meaning_class1: Vec::new(),
            meaning_class0: Vec::new(),
            meaning_anchor_count: default_meaning_anchor_count(),
        }
    }
}

/// Similarity-difference thresholds and bucket edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    /// |difference| above this flags as significant.
    #[serde(default = "default_significant")]
    pub significant: f64,
    /// |difference| above this flags as strong.
    #[serde(default = "default_strong")]
    pub strong: f64,
    /// Ascending |difference| edges for meaning buckets.
    #[serde(default = "default_edges")]
    pub meaning_bucket_edges: Vec<f64>,
}

fn default_significant() -> f64 {
    DEFAULT_SIGNIFICANT
}
fn default_strong() -> f64 {
    DEFAULT_STRONG
}
fn default_edges() -> Vec<f64> {
    DEFAULT_MEANING_EDGES.to_vec()
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        ThresholdsConfig {
            significant: default_significant(),
            strong: default_strong(),
            meaning_bucket_edges: default_edges(),
        }
    }
}

/// Reference-classifier parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Gradient-descent step size.
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Full-batch epochs.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// L2 penalty on weights.
    #[serde(default = "default_l2")]
    pub l2: f64,
    /// Decision threshold on the class-1 probability.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_learning_rate() -> f64 {
    0.5
}
fn default_epochs() -> usize {
    200
}
fn default_l2() -> f64 {
    1e-4
}
fn default_threshold() -> f64 {
    0.5
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            l2: default_l2(),
            threshold: default_threshold(),
        }
    }
}

/// Report rendering parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Report heading.
    #[serde(default = "default_title")]
    pub title: String,
    /// Opacity of the strongest highlight, in (0, 1].
    #[serde(default = "default_max_alpha")]
    pub max_alpha: f64,
    /// Highlight color for class-1 contributions, `#RRGGBB`.
    #[serde(default = "default_class1_color")]
    pub class1_color: String,
    /// Highlight color for class-0 contributions, `#RRGGBB`.
    #[serde(default = "default_class0_color")]
    pub class0_color: String,
    /// Representative misclassified examples per segment.
    #[serde(default = "default_representatives")]
    pub representatives: usize,
}

fn default_title() -> String {
    "Classifier diagnostics".to_string()
}
fn default_max_alpha() -> f64 {
    0.75
}
fn default_class1_color() -> String {
    "#2E75B6".to_string()
}
fn default_class0_color() -> String {
    "#C00000".to_string()
}
fn default_representatives() -> usize {
    3
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            title: default_title(),
            max_alpha: default_max_alpha(),
            class1_color: default_class1_color(),
            class0_color: default_class0_color(),
            representatives: default_representatives(),
        }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// JSON-lines corpus file.
    pub corpus: PathBuf,
    /// Embedding table (text word2vec/GloVe format, optionally gzipped).
    pub embeddings: PathBuf,
    /// Externally produced per-token attributions (JSON lines). `null`
    /// selects the built-in reference classifier; setting this requires
    /// `predictions` too, since the reference model's predictions would not
    /// correspond to external scores.
    #[serde(default)]
    pub attributions: Option<PathBuf>,
    /// Externally produced predictions (JSON lines).
    #[serde(default)]
    pub predictions: Option<PathBuf>,
    /// Normalization pattern rules; `null` selects the bundled rules.
    #[serde(default)]
    pub pattern_rules: Option<PathBuf>,
    /// Stopword list; `null` selects the bundled list.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    /// Positive opinion-word list; `null` selects the bundled list.
    #[serde(default)]
    pub sentiment_positive: Option<PathBuf>,
    /// Negative opinion-word list; `null` selects the bundled list.
    #[serde(default)]
    pub sentiment_negative: Option<PathBuf>,
    /// Part-of-speech TSV; `null` selects the bundled lexicon.
    #[serde(default)]
    pub pos_lexicon: Option<PathBuf>,
    /// Directory all artifacts are written under.
    pub out_dir: PathBuf,
    /// Seed for every stochastic stage.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Partitioning schemes.
    #[serde(default)]
    pub segmentation: SegmentationConfig,
    /// Token-importance parameters.
    #[serde(default)]
    pub aggregation: AggregationConfig,
    /// Anchor word lists.
    #[serde(default)]
    pub anchors: AnchorsConfig,
    /// Similarity thresholds.
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    /// Reference-classifier parameters.
    #[serde(default)]
    pub model: ModelConfig,
    /// Report parameters.
    #[serde(default)]
    pub report: ReportConfig,
}

fn default_seed() -> u64 {
    7
}

/// Split a `--set` argument into (dotted path, raw value).
fn split_override(raw: &str) -> Result<(&str, &str)> {
    match raw.split_once('=') {
        Some((key, value)) if !key.is_empty() => Ok((key, value)),
        _ => Err(SeglensError::InvalidConfig(format!(
            "override {raw:?} is not of the form key.path=value"
        ))),
    }
}

/// Apply one dotted-path override to a JSON tree. The value is parsed as
/// JSON when possible and treated as a bare string otherwise, so
/// `--set aggregation.top_k=50` and `--set aggregation.scheme=lda` both
/// work without quoting gymnastics.
pub fn apply_override(root: &mut serde_json::Value, raw: &str) -> Result<()> {
    let (path, raw_value) = split_override(raw)?;
    let value = serde_json::from_str::<serde_json::Value>(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node.as_object_mut().ok_or_else(|| {
            SeglensError::InvalidConfig(format!(
                "cannot set {path:?}: {:?} is not an object",
                parts[..i].join(".")
            ))
        })?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), value);
            return Ok(());
        }
        node = map
            .entry((*part).to_string())
            .or_insert_with(|| serde_json::Value::Object(serde_json::Map::new()));
    }
    unreachable!("split never yields zero parts")
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl RunConfig {
    /// Parse a config from JSON text (no path resolution).
    pub fn from_json(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let mut value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| SeglensError::InvalidConfig(format!("config is not valid JSON: {e}")))?;
        for raw in overrides {
            apply_override(&mut value, raw)?;
        }
        let config: RunConfig = serde_json::from_value(value)
            .map_err(|e| SeglensError::InvalidConfig(format!("config: {e}")))?;
        config.validate_values()?;
        Ok(config)
    }

    /// Load a config file, apply `--set` overrides, resolve relative paths
    /// against the file's directory, and validate parameter ranges.
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = RunConfig::from_json(&text, overrides)?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        config.resolve_paths(&base);
        Ok(config)
    }

    /// Resolve every relative path against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus);
        resolve(base, &mut self.embeddings);
        resolve(base, &mut self.out_dir);
        for optional in [
            &mut self.attributions,
            &mut self.predictions,
            &mut self.pattern_rules,
            &mut self.stopwords,
            &mut self.sentiment_positive,
            &mut self.sentiment_negative,
            &mut self.pos_lexicon,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, optional);
        }
    }

    /// Check numeric ranges and cross-field consistency. File existence is
    /// checked where the files are read, so missing inputs surface with
    /// their path.
    pub fn validate_values(&self) -> Result<()> {
        let bad = |message: String| Err(SeglensError::InvalidConfig(message));
        if self.attributions.is_some() != self.predictions.is_some() {
            return bad(
                "attributions and predictions must be supplied together: external \
                 attribution scores do not correspond to the built-in reference \
                 model's predictions"
                    .to_string(),
            );
        }
        let a = &self.aggregation;
        if !(a.min_freq_fraction.is_finite() && (0.0..1.0).contains(&a.min_freq_fraction)) {
            return bad(format!(
                "aggregation.min_freq_fraction must be in [0, 1), got {}",
                a.min_freq_fraction
            ));
        }
        if a.top_k == 0 {
            return bad("aggregation.top_k must be at least 1".to_string());
        }
        match a.scheme.as_str() {
            "metadata" | "length" | "oov" | "lda" => {}
            other => {
                return bad(format!(
                    "aggregation.scheme must be one of metadata, length, oov, lda; \
                     got {other:?}"
                ))
            }
        }
        if a.scheme == "metadata" && self.segmentation.metadata_field.is_none() {
            return bad(
                "aggregation.scheme is \"metadata\" but segmentation.metadata_field \
                 is null"
                    .to_string(),
            );
        }
        let s = &self.segmentation;
        if s.lda.topics < 2 {
            return bad(format!(
                "segmentation.lda.topics must be at least 2, got {}",
                s.lda.topics
            ));
        }
        if s.lda.iterations == 0 {
            return bad("segmentation.lda.iterations must be at least 1".to_string());
        }
        if !(s.lda.beta > 0.0 && s.lda.beta.is_finite()) {
            return bad(format!(
                "segmentation.lda.beta must be positive, got {}",
                s.lda.beta
            ));
        }
        if let Some(alpha) = s.lda.alpha {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return bad(format!(
                    "segmentation.lda.alpha must be positive, got {alpha}"
                ));
            }
        }
        let t = &self.thresholds;
        if !(t.significant > 0.0 && t.strong > t.significant && t.strong.is_finite()) {
            return bad(format!(
                "thresholds must satisfy 0 < significant < strong, got \
                 significant={}, strong={}",
                t.significant, t.strong
            ));
        }
        crate::word_grouping::meaning_bucket(0.0, &t.meaning_bucket_edges)?;
        if self.anchors.meaning_anchor_count == 0 {
            return bad("anchors.meaning_anchor_count must be at least 1".to_string());
        }
        let m = &self.model;
        if !(m.learning_rate > 0.0 && m.learning_rate.is_finite()) {
            return bad(format!(
                "model.learning_rate must be positive, got {}",
                m.learning_rate
            ));
        }
        if m.epochs == 0 {
            return bad("model.epochs must be at least 1".to_string());
        }
        if !(m.l2 >= 0.0 && m.l2.is_finite()) {
            return bad(format!("model.l2 must be non-negative, got {}", m.l2));
        }
        if !(m.threshold > 0.0 && m.threshold < 1.0) {
            return bad(format!(
                "model.threshold must be in (0, 1), got {}",
                m.threshold
            ));
        }
        let r = &self.report;
        if r.representatives == 0 {
            return bad("report.representatives must be at least 1".to_string());
        }
        if !(r.max_alpha > 0.0 && r.max_alpha <= 1.0) {
            return bad(format!(
                "report.max_alpha must be in (0, 1], got {}",
                r.max_alpha
            ));
        }
        crate::report::parse_hex_color(&r.class1_color)?;
        crate::report::parse_hex_color(&r.class0_color)?;
        Ok(())
    }
}
