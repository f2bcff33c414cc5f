//! Stage orchestration: run the analysis pipeline from a [`RunConfig`] up to
//! a requested stage, writing each stage's artifacts under the output
//! directory.
//!
//! Stages run in a fixed order (train-ref, attribute, segment, aggregate,
//! annotate, bias, errors, report); later stages reuse in-memory results
//! from earlier ones within a run. Across runs, the expensive stages
//! (reference training, attribution, latent-topic fitting) are cached in
//! `cache.json` keyed by a content hash of their inputs and parameters, so
//! `report` re-runs only dirty stages. All artifacts are byte-deterministic
//! for identical inputs and seed.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::aggregation::{
    aggregate_token_importance, unique_top_tokens, write_importance_csv, AggregationOptions,
    ImportanceAnalysis, ImportanceRow, TokenImportanceTable,
};
use crate::attribution::{
    attribute_corpus, load_attributions, load_predictions, predict_corpus, train_reference_classifier,
    write_attributions, write_predictions, AttributionSet, LinearModel, PredictionSet, TrainParams,
};
use crate::config::RunConfig;
use crate::corpus::{load_corpus, RuleSet, Stopwords, TokenizedCorpus};
use crate::diagnostics::{
    error_rate_table, per_segment_confusion, select_representative_errors, write_confusion_csv,
    write_error_grid_csv, ConfusionMatrix, ErrorGrid, ErrorKind, RateDenominator,
    RepresentativeExample,
};
use crate::embeddings::{load_embeddings, AnchorSet, EmbeddingTable, ResolvedAnchorSet};
use crate::lda::{lda_fit, LdaParams};
use crate::report::{
    emit_report, importance_grid_csv, meaning_annotator, pos_annotator, render_bias_section,
    render_error_grid, render_importance_grid, render_performance_section,
    render_representatives_section, render_unique_tokens_section, sentiment_annotator,
    CellAnnotation, Palette, ReportBundle, SectionPage,
};
use crate::segmentation::{
    segment_by_length, segment_by_metadata, segment_by_oov, SegmentAssignment,
};
use crate::word_grouping::{
    gender_bias_scan, meaning_annotate, BiasRow, Meaning, MeaningAnnotation, PosLexicon,
    SentimentLexicon,
};
use crate::{Result, SeglensError};

/// Pipeline stages in execution order. Running a stage runs everything
/// before it first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// Check config and load every input; writes nothing.
    Validate,
    /// Train the reference classifier.
    TrainRef,
    /// Produce attributions and predictions.
    Attribute,
    /// Compute all segmentation schemes.
    Segment,
    /// Aggregate token importance per scheme.
    Aggregate,
    /// Annotate top tokens by meaning, sentiment, and part of speech.
    Annotate,
    /// Scan top tokens for anchor-similarity bias.
    Bias,
    /// Confusion matrices, error grids, representative examples.
    Errors,
    /// Render the full report bundle.
    Report,
}

/// Everything loaded from input files once per run.
pub struct LoadedInputs {
    /// Tokenized corpus.
    pub corpus: TokenizedCorpus,
    /// Embedding table.
    pub embeddings: EmbeddingTable,
    /// Sentiment lexicon.
    pub sentiment: SentimentLexicon,
    /// Part-of-speech lexicon.
    pub pos: PosLexicon,
    /// Pattern rules used at tokenization (kept for fingerprinting).
    pub rules_origin: String,
    /// Stopword origin (kept for fingerprinting).
    pub stopwords_origin: String,
}

/// Load and cross-check every input referenced by the config.
pub fn load_inputs(config: &RunConfig) -> Result<LoadedInputs> {
    let rules = match &config.pattern_rules {
        Some(path) => RuleSet::from_file(path)?,
        None => RuleSet::bundled(),
    };
    let stopwords = match &config.stopwords {
        Some(path) => Stopwords::from_file(path)?,
        None => Stopwords::bundled(),
    };
    let raw = load_corpus(&config.corpus)?;
    let corpus = raw.tokenize(&rules, &stopwords);
    let embeddings = load_embeddings(&config.embeddings)?;
    let sentiment = match (&config.sentiment_positive, &config.sentiment_negative) {
        (Some(pos), Some(neg)) => SentimentLexicon::load(pos, neg)?,
        (None, None) => SentimentLexicon::bundled(),
        _ => {
            return Err(SeglensError::InvalidConfig(
                "sentiment_positive and sentiment_negative must be supplied together"
                    .to_string(),
            ))
        }
    };
    let pos = match &config.pos_lexicon {
        Some(path) => PosLexicon::load(path, crate::word_grouping::default_pos_groups())?,
        None => PosLexicon::bundled(),
    };
    let origin = |p: &Option<PathBuf>| match p {
        Some(path) => path.display().to_string(),
        None => "bundled".to_string(),
    };
    let (positive_words, negative_words) = sentiment.sizes();
    log::info!(
        "inputs: {} messages, {} embedding vectors (dim {}), sentiment {}+{}, pos {} entries",
        corpus.len(),
        embeddings.len(),
        embeddings.dim(),
        positive_words,
        negative_words,
        pos.len()
    );
    Ok(LoadedInputs {
        corpus,
        embeddings,
        sentiment,
        pos,
        rules_origin: origin(&config.pattern_rules),
        stopwords_origin: origin(&config.stopwords),
    })
}

/// Validate the run without writing anything: parameter ranges were checked
/// at config load; this loads every referenced file, including external
/// attributions and predictions when configured.
pub fn validate_run(config: &RunConfig) -> Result<()> {
    let inputs = load_inputs(config)?;
    if let (Some(attr_path), Some(pred_path)) = (&config.attributions, &config.predictions) {
        let attributions = load_attributions(attr_path, &inputs.corpus)?;
        let predictions = load_predictions(pred_path, &inputs.corpus, config.model.threshold)?;
        log::info!(
            "external scores: {} attribution records, {} predictions",
            attributions.len(),
            predictions.len()
        );
    }
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CacheFile {
    stages: BTreeMap<String, CacheEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    fingerprint: String,
    artifacts: Vec<String>,
}

struct Fingerprint(sha2::Sha256);

impl Fingerprint {
    fn new(stage: &str) -> Fingerprint {
        let mut hasher = sha2::Sha256::new();
        hasher.update(stage.as_bytes());
        hasher.update([0]);
        Fingerprint(hasher)
    }

    fn text(&mut self, label: &str, value: &str) {
        self.0.update(label.as_bytes());
        self.0.update([1]);
        self.0.update(value.as_bytes());
        self.0.update([2]);
    }

    fn file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        self.0.update(path.display().to_string().as_bytes());
        self.0.update([3]);
        self.0.update(&bytes);
        self.0.update([4]);
        Ok(())
    }

    fn hex(self) -> String {
        let digest = self.0.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Serialized annotation row for one top token: importance statistics plus
/// all three word-group views.
#[derive(Debug, Clone, Serialize)]
pub struct AnnotatedRow {
    /// Rank within its table.
    pub rank: usize,
    /// The token.
    pub token: String,
    /// Summed attribution.
    pub total_relevance: f64,
    /// Summed attribution over within-segment document frequency.
    pub mean_relevance: f64,
    /// Within-segment document frequency.
    pub doc_frequency: usize,
    /// Sentiment tag name.
    pub sentiment: String,
    /// Part-of-speech group name, when the token is in the lexicon.
    pub pos: Option<String>,
    /// Meaning annotation against the anchor pair.
    pub meaning: Meaning,
}

/// The annotate stage's artifact.
#[derive(Debug, Clone, Serialize)]
pub struct AnnotationArtifact {
    /// Meaning anchors toward class 1 (resolved words actually used).
    pub anchors_class1: Vec<String>,
    /// Meaning anchors toward class 0.
    pub anchors_class0: Vec<String>,
    /// Annotated full-data class-1 top tokens.
    pub full_data_class1: Vec<AnnotatedRow>,
    /// Annotated full-data class-0 top tokens.
    pub full_data_class0: Vec<AnnotatedRow>,
    /// Meaning annotations for every token shown anywhere in the report
    /// grids (union over all segments and both directions, sorted).
    pub meanings: Vec<MeaningAnnotation>,
}

/// Artifacts of the errors stage.
pub struct ErrorArtifacts {
    /// Overall plus per-segment confusion matrices.
    pub confusion_rows: Vec<(String, ConfusionMatrix)>,
    /// False-positive rate grid.
    pub grid_fp: ErrorGrid,
    /// False-negative rate grid.
    pub grid_fn: ErrorGrid,
    /// Representative false positives per segment.
    pub reps_fp: Vec<(String, Vec<RepresentativeExample>)>,
    /// Representative false negatives per segment.
    pub reps_fn: Vec<(String, Vec<RepresentativeExample>)>,
}

fn scheme_file_name(scheme: &str) -> String {
    scheme
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}

fn pretty_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| SeglensError::Internal(format!("serialize export: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &pretty_json(value)?)
}

fn csv_quote(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}

/// One pipeline run: loaded inputs plus memoized stage results.
pub struct Pipeline {
    config: RunConfig,
    inputs: LoadedInputs,
    stamp: Option<String>,
    cache: CacheFile,
    model: Option<LinearModel>,
    scores: Option<(AttributionSet, PredictionSet)>,
    segments: Option<Vec<(String, SegmentAssignment)>>,
    analyses: Option<Vec<(String, ImportanceAnalysis)>>,
    annotations: Option<AnnotationArtifact>,
    bias_rows: Option<Vec<BiasRow>>,
    errors: Option<ErrorArtifacts>,
}

impl Pipeline {
    /// Load inputs, create the output directory, and read the stage cache.
    pub fn new(config: RunConfig, stamp: Option<String>) -> Result<Pipeline> {
        let inputs = load_inputs(&config)?;
        create_dir(&config.out_dir)?;
        let cache_path = config.out_dir.join("cache.json");
        let cache = if cache_path.exists() {
            serde_json::from_str(&read_text(&cache_path)?).unwrap_or_else(|e| {
                log::warn!("ignoring unreadable cache.json: {e}");
                CacheFile::default()
            })
        } else {
            CacheFile::default()
        };
        Ok(Pipeline {
            config,
            inputs,
            stamp,
            cache,
            model: None,
            scores: None,
            segments: None,
            analyses: None,
            annotations: None,
            bias_rows: None,
            errors: None,
        })
    }

    /// The loaded inputs.
    #[must_use]
    pub fn inputs(&self) -> &LoadedInputs {
        &self.inputs
    }

    /// Run every stage up to and including `stage`, then persist the cache.
    /// The validate stage must not write anything, so it is handled by
    /// [`validate_run`] rather than a constructed pipeline.
    pub fn run(&mut self, stage: Stage) -> Result<()> {
        if stage == Stage::Validate {
            return Err(SeglensError::Internal(
                "validate runs through validate_run, not the pipeline".to_string(),
            ));
        }
        let external = self.config.attributions.is_some();
        if stage >= Stage::TrainRef && !(external && stage > Stage::TrainRef) {
            self.ensure_model()?;
        }
        if stage >= Stage::Attribute {
            self.ensure_scores()?;
        }
        if stage >= Stage::Segment {
            self.ensure_segments()?;
        }
        if stage >= Stage::Aggregate {
            self.ensure_analyses()?;
        }
        if stage >= Stage::Annotate {
            self.ensure_annotations()?;
        }
        if stage >= Stage::Bias {
            self.ensure_bias()?;
        }
        if stage >= Stage::Errors {
            self.ensure_errors()?;
        }
        if stage >= Stage::Report {
            self.render_report()?;
        }
        self.save_cache()
    }

    fn save_cache(&self) -> Result<()> {
        write_json(&self.config.out_dir.join("cache.json"), &self.cache)
    }

    fn cache_hit(&self, stage: &str, fingerprint: &str) -> bool {
        match self.cache.stages.get(stage) {
            Some(entry) if entry.fingerprint == fingerprint => entry
                .artifacts
                .iter()
                .all(|rel| self.config.out_dir.join(rel).exists()),
            _ => false,
        }
    }

    fn cache_store(&mut self, stage: &str, fingerprint: String, artifacts: &[&str]) {
        self.cache.stages.insert(
            stage.to_string(),
            CacheEntry {
                fingerprint,
                artifacts: artifacts.iter().map(|s| (*s).to_string()).collect(),
            },
        );
    }

    fn corpus_fingerprint(&self, fp: &mut Fingerprint) -> Result<()> {
        fp.file(&self.config.corpus)?;
        match &self.config.pattern_rules {
            Some(path) => fp.file(path)?,
            None => fp.text("pattern_rules", "bundled"),
        }
        match &self.config.stopwords {
            Some(path) => fp.file(path)?,
            None => fp.text("stopwords", "bundled"),
        }
        Ok(())
    }

    fn train_params(&self) -> TrainParams {
        TrainParams {
            learning_rate: self.config.model.learning_rate,
            epochs: self.config.model.epochs,
            l2: self.config.model.l2,
            seed: self.config.seed,
        }
    }

    fn ensure_model(&mut self) -> Result<()> {
        if self.model.is_some() {
            return Ok(());
        }
        let mut fp = Fingerprint::new("train-ref");
        self.corpus_fingerprint(&mut fp)?;
        let params = self.train_params();
        fp.text(
            "params",
            &format!(
                "lr={} epochs={} l2={} seed={} threshold={}",
                params.learning_rate,
                params.epochs,
                params.l2,
                params.seed,
                self.config.model.threshold
            ),
        );
        let fingerprint = fp.hex();
        let model_path = self.config.out_dir.join("model.json");
        if self.cache_hit("train-ref", &fingerprint) {
            log::info!("stage train-ref: cached");
            self.model = Some(LinearModel::load(&model_path)?);
            return Ok(());
        }
        log::info!(
            "stage train-ref: training on {} messages",
            self.inputs.corpus.len()
        );
        let model =
            train_reference_classifier(&self.inputs.corpus, &params, self.config.model.threshold)?;
        model.save(&model_path)?;
        self.cache_store("train-ref", fingerprint, &["model.json"]);
        self.model = Some(model);
        Ok(())
    }

    fn ensure_scores(&mut self) -> Result<()> {
        if self.scores.is_some() {
            return Ok(());
        }
        if let (Some(attr_path), Some(pred_path)) =
            (self.config.attributions.clone(), self.config.predictions.clone())
        {
            log::info!("stage attribute: loading external scores");
            let attributions = load_attributions(&attr_path, &self.inputs.corpus)?;
            let predictions =
                load_predictions(&pred_path, &self.inputs.corpus, self.config.model.threshold)?;
            self.scores = Some((attributions, predictions));
            return Ok(());
        }
        self.ensure_model()?;
        let mut fp = Fingerprint::new("attribute");
        self.corpus_fingerprint(&mut fp)?;
        let params = self.train_params();
        fp.text(
            "params",
            &format!(
                "lr={} epochs={} l2={} seed={} threshold={}",
                params.learning_rate,
                params.epochs,
                params.l2,
                params.seed,
                self.config.model.threshold
            ),
        );
        let fingerprint = fp.hex();
        let attr_path = self.config.out_dir.join("attributions.jsonl");
        let pred_path = self.config.out_dir.join("predictions.jsonl");
        if self.cache_hit("attribute", &fingerprint) {
            log::info!("stage attribute: cached");
            let attributions = load_attributions(&attr_path, &self.inputs.corpus)?;
            let predictions =
                load_predictions(&pred_path, &self.inputs.corpus, self.config.model.threshold)?;
            self.scores = Some((attributions, predictions));
            return Ok(());
        }
        log::info!("stage attribute: scoring {} messages", self.inputs.corpus.len());
        let model = self.model.as_ref().expect("ensured above");
        let attributions = attribute_corpus(model, &self.inputs.corpus);
        let predictions = predict_corpus(model, &self.inputs.corpus);
        write_attributions(&attr_path, &attributions)?;
        write_predictions(&pred_path, &predictions)?;
        self.cache_store(
            "attribute",
            fingerprint,
            &["attributions.jsonl", "predictions.jsonl"],
        );
        self.scores = Some((attributions, predictions));
        Ok(())
    }

    fn lda_assignment(&mut self) -> Result<SegmentAssignment> {
        let lda_config = self.config.segmentation.lda.clone();
        let mut fp = Fingerprint::new("lda");
        self.corpus_fingerprint(&mut fp)?;
        fp.text(
            "params",
            &format!(
                "topics={} alpha={:?} beta={} iterations={} seed={}",
                lda_config.topics,
                lda_config.alpha,
                lda_config.beta,
                lda_config.iterations,
                self.config.seed
            ),
        );
        let fingerprint = fp.hex();
        let rel = "segments/lda.csv";
        let csv_path = self.config.out_dir.join(rel);
        if self.cache_hit("lda", &fingerprint) {
            log::info!("stage segment: lda cached");
            return SegmentAssignment::read_csv(&csv_path, "lda", &self.inputs.corpus);
        }
        log::info!(
            "stage segment: fitting {} latent topics over {} messages",
            lda_config.topics,
            self.inputs.corpus.len()
        );
        let params = LdaParams {
            topics: lda_config.topics,
            alpha: lda_config.alpha,
            beta: lda_config.beta,
            iterations: lda_config.iterations,
            seed: self.config.seed,
            check_counts_every_sweep: false,
        };
        let model = lda_fit(&self.inputs.corpus, &params)?;
        let assignment = model.hard_assignment();
        assignment.write_csv(&csv_path, &self.inputs.corpus)?;
        self.cache_store("lda", fingerprint, &[rel]);
        Ok(assignment)
    }

    fn ensure_segments(&mut self) -> Result<()> {
        if self.segments.is_some() {
            return Ok(());
        }
        create_dir(&self.config.out_dir.join("segments"))?;
        let mut segments: Vec<(String, SegmentAssignment)> = Vec::new();
        if let Some(field) = self.config.segmentation.metadata_field.clone() {
            segments.push((
                "metadata".to_string(),
                segment_by_metadata(&self.inputs.corpus, &field),
            ));
        }
        segments.push((
            "length".to_string(),
            segment_by_length(&self.inputs.corpus, &self.config.segmentation.length_boundaries)?,
        ));
        segments.push((
            "oov".to_string(),
            segment_by_oov(
                &self.inputs.corpus,
                &self.inputs.embeddings,
                &self.config.segmentation.oov_boundaries,
            )?,
        ));
        segments.push(("lda".to_string(), self.lda_assignment()?));
        for (key, assignment) in &segments {
            if *key == "lda" {
                continue; // written (or reloaded) by lda_assignment
            }
            let rel = format!("segments/{}.csv", scheme_file_name(assignment.scheme()));
            assignment.write_csv(&self.config.out_dir.join(rel), &self.inputs.corpus)?;
        }
        log::info!("stage segment: {} schemes", segments.len());
        self.segments = Some(segments);
        Ok(())
    }

    fn aggregation_options(&self) -> AggregationOptions {
        AggregationOptions {
            min_freq_fraction: self.config.aggregation.min_freq_fraction,
            ranking: self.config.aggregation.ranking,
            filter: self.config.aggregation.message_filter,
        }
    }

    fn ensure_analyses(&mut self) -> Result<()> {
        if self.analyses.is_some() {
            return Ok(());
        }
        self.ensure_scores()?;
        self.ensure_segments()?;
        create_dir(&self.config.out_dir.join("importance"))?;
        let options = self.aggregation_options();
        let (attributions, _) = self.scores.as_ref().expect("ensured above");
        let segments = self.segments.as_ref().expect("ensured above");
        let mut analyses = Vec::with_capacity(segments.len());
        for (key, assignment) in segments {
            let analysis = aggregate_token_importance(
                &self.inputs.corpus,
                attributions,
                assignment,
                &options,
            )?;
            let rel = format!("importance/{}.csv", scheme_file_name(assignment.scheme()));
            write_importance_csv(&self.config.out_dir.join(rel), &analysis)?;
            analyses.push((key.clone(), analysis));
        }
        log::info!("stage aggregate: {} schemes", analyses.len());
        self.analyses = Some(analyses);
        Ok(())
    }

    /// The importance analysis for the configured report scheme.
    fn primary_analysis(&self) -> Result<&ImportanceAnalysis> {
        let key = &self.config.aggregation.scheme;
        self.analyses
            .as_ref()
            .and_then(|a| a.iter().find(|(k, _)| k == key))
            .map(|(_, analysis)| analysis)
            .ok_or_else(|| {
                SeglensError::InvalidConfig(format!("no analysis for scheme {key:?}"))
            })
    }

    fn primary_assignment(&self) -> Result<&SegmentAssignment> {
        let key = &self.config.aggregation.scheme;
        self.segments
            .as_ref()
            .and_then(|s| s.iter().find(|(k, _)| k == key))
            .map(|(_, assignment)| assignment)
            .ok_or_else(|| {
                SeglensError::InvalidConfig(format!("no segmentation for scheme {key:?}"))
            })
    }

    fn assignment_by_key(&self, key: &str) -> Option<&SegmentAssignment> {
        self.segments
            .as_ref()
            .and_then(|s| s.iter().find(|(k, _)| k == key))
            .map(|(_, assignment)| assignment)
    }

    fn top_tokens(table: &TokenImportanceTable, k: usize) -> Vec<&str> {
        table.top_k(k).iter().map(|r| r.token.as_str()).collect()
    }

    /// Meaning anchors: configured word lists when non-empty, else the top
    /// full-data tokens of each direction.
    fn meaning_anchor_words(&self) -> Result<(Vec<String>, Vec<String>)> {
        let analysis = self.primary_analysis()?;
        let full = analysis.full_data();
        let n = self.config.anchors.meaning_anchor_count;
        let derive = |table: &TokenImportanceTable, configured: &[String]| -> Vec<String> {
            if configured.is_empty() {
                table
                    .top_k(n)
                    .iter()
                    .map(|r| r.token.clone())
                    .collect()
            } else {
                configured.to_vec()
            }
        };
        Ok((
            derive(&full.class1, &self.config.anchors.meaning_class1),
            derive(&full.class0, &self.config.anchors.meaning_class0),
        ))
    }

    fn resolve_anchor(&self, name: &str, words: &[String]) -> Result<ResolvedAnchorSet> {
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        AnchorSet::new(name, &refs).resolve(&self.inputs.embeddings)
    }

    fn bias_anchors(&self) -> Result<(ResolvedAnchorSet, ResolvedAnchorSet)> {
        let male = if self.config.anchors.male.is_empty() {
            AnchorSet::default_male().resolve(&self.inputs.embeddings)?
        } else {
            self.resolve_anchor("male", &self.config.anchors.male)?
        };
        let female = if self.config.anchors.female.is_empty() {
            AnchorSet::default_female().resolve(&self.inputs.embeddings)?
        } else {
            self.resolve_anchor("female", &self.config.anchors.female)?
        };
        Ok((male, female))
    }

    /// Every token shown in any report grid: union over all segments and
    /// both directions of the primary analysis, sorted.
    fn grid_token_union(&self) -> Result<Vec<String>> {
        let analysis = self.primary_analysis()?;
        let k = self.config.aggregation.top_k;
        let mut tokens: Vec<String> = analysis
            .segments
            .iter()
            .flat_map(|s| {
                s.class1
                    .top_k(k)
                    .iter()
                    .chain(s.class0.top_k(k).iter())
                    .map(|r| r.token.clone())
            })
            .collect();
        tokens.sort();
        tokens.dedup();
        Ok(tokens)
    }

    fn ensure_annotations(&mut self) -> Result<()> {
        if self.annotations.is_some() {
            return Ok(());
        }
        self.ensure_analyses()?;
        let (words1, words0) = self.meaning_anchor_words()?;
        let anchors1 = self.resolve_anchor("meaning_class1", &words1)?;
        let anchors0 = self.resolve_anchor("meaning_class0", &words0)?;
        let edges = self.config.thresholds.meaning_bucket_edges.clone();
        let union = self.grid_token_union()?;
        let union_refs: Vec<&str> = union.iter().map(String::as_str).collect();
        let meanings = meaning_annotate(
            &union_refs,
            &anchors1,
            &anchors0,
            &self.inputs.embeddings,
            &edges,
        )?;
        let meaning_of: HashMap<&str, &Meaning> = meanings
            .iter()
            .map(|m| (m.token.as_str(), &m.meaning))
            .collect();
        let analysis = self.primary_analysis()?;
        let full = analysis.full_data();
        let k = self.config.aggregation.top_k;
        let annotate_rows = |rows: &[ImportanceRow]| -> Vec<AnnotatedRow> {
            rows.iter()
                .map(|row| AnnotatedRow {
                    rank: row.rank,
                    token: row.token.clone(),
                    total_relevance: row.total_relevance,
                    mean_relevance: row.mean_relevance,
                    doc_frequency: row.doc_frequency,
                    sentiment: self.inputs.sentiment.tag(&row.token).name().to_string(),
                    pos: self.inputs.pos.group(&row.token).map(|g| g.name().to_string()),
                    meaning: meaning_of
                        .get(row.token.as_str())
                        .copied()
                        .cloned()
                        .unwrap_or(Meaning::NoEmbedding),
                })
                .collect()
        };
        let artifact = AnnotationArtifact {
            anchors_class1: anchors1.words().to_vec(),
            anchors_class0: anchors0.words().to_vec(),
            full_data_class1: annotate_rows(full.class1.top_k(k)),
            full_data_class0: annotate_rows(full.class0.top_k(k)),
            meanings,
        };
        write_json(&self.config.out_dir.join("annotations.json"), &artifact)?;
        log::info!(
            "stage annotate: {} tokens against anchors [{}] vs [{}]",
            artifact.meanings.len(),
            artifact.anchors_class1.join(" "),
            artifact.anchors_class0.join(" ")
        );
        self.annotations = Some(artifact);
        Ok(())
    }

    fn ensure_bias(&mut self) -> Result<()> {
        if self.bias_rows.is_some() {
            return Ok(());
        }
        self.ensure_analyses()?;
        let (male, female) = self.bias_anchors()?;
        let analysis = self.primary_analysis()?;
        let full = analysis.full_data();
        let tokens = Self::top_tokens(&full.class1, self.config.aggregation.top_k);
        let rows = gender_bias_scan(
            &tokens,
            &self.inputs.embeddings,
            &male,
            &female,
            self.config.thresholds.significant,
            self.config.thresholds.strong,
        )?;
        crate::word_grouping::write_bias_csv(&self.config.out_dir.join("bias.csv"), &rows)?;
        log::info!(
            "stage bias: {} of {} top tokens in vocabulary, {} flagged",
            rows.len(),
            tokens.len(),
            rows.iter()
                .filter(|r| r.flag != crate::word_grouping::BiasFlag::None)
                .count()
        );
        self.bias_rows = Some(rows);
        Ok(())
    }

    /// The grid whose columns cross the primary scheme: length buckets,
    /// unless the primary scheme is itself length, then the
    /// out-of-vocabulary buckets.
    fn column_key(&self) -> &'static str {
        if self.config.aggregation.scheme == "length" {
            "oov"
        } else {
            "length"
        }
    }

    fn ensure_errors(&mut self) -> Result<()> {
        if self.errors.is_some() {
            return Ok(());
        }
        self.ensure_scores()?;
        self.ensure_segments()?;
        let (attributions, predictions) = self.scores.as_ref().expect("ensured above");
        let assignment = self.primary_assignment()?;
        let columns = self.assignment_by_key(self.column_key()).ok_or_else(|| {
            SeglensError::Internal(format!("no segmentation for scheme {:?}", self.column_key()))
        })?;
        let corpus = &self.inputs.corpus;
        let mut confusion_rows = vec![(
            crate::aggregation::FULL_DATA_SEGMENT.to_string(),
            crate::diagnostics::confusion_matrix(corpus, predictions)?,
        )];
        confusion_rows.extend(per_segment_confusion(corpus, predictions, assignment)?);
        let grid_fp = error_rate_table(
            corpus,
            predictions,
            assignment,
            columns,
            ErrorKind::FalsePositive,
            RateDenominator::ClassConditional,
        )?;
        let grid_fn = error_rate_table(
            corpus,
            predictions,
            assignment,
            columns,
            ErrorKind::FalseNegative,
            RateDenominator::ClassConditional,
        )?;
        let n = self.config.report.representatives;
        let reps_fp = select_representative_errors(
            corpus,
            predictions,
            attributions,
            assignment,
            n,
            ErrorKind::FalsePositive,
        )?;
        let reps_fn = select_representative_errors(
            corpus,
            predictions,
            attributions,
            assignment,
            n,
            ErrorKind::FalseNegative,
        )?;
        let out = &self.config.out_dir;
        write_confusion_csv(&out.join("confusion.csv"), &confusion_rows)?;
        write_error_grid_csv(&out.join("errors_fp.csv"), &grid_fp)?;
        write_error_grid_csv(&out.join("errors_fn.csv"), &grid_fn)?;
        #[derive(Serialize)]
        struct Representatives<'a> {
            false_positives: &'a [(String, Vec<RepresentativeExample>)],
            false_negatives: &'a [(String, Vec<RepresentativeExample>)],
        }
        write_json(
            &out.join("representatives.json"),
            &Representatives {
                false_positives: &reps_fp,
                false_negatives: &reps_fn,
            },
        )?;
        log::info!(
            "stage errors: {} confusion rows, grids {}x{}",
            confusion_rows.len(),
            grid_fp.rows.len(),
            grid_fp.columns.len()
        );
        self.errors = Some(ErrorArtifacts {
            confusion_rows,
            grid_fp,
            grid_fn,
            reps_fp,
            reps_fn,
        });
        Ok(())
    }

    fn palette(&self) -> Result<Palette> {
        let palette = Palette {
            class1_color: self.config.report.class1_color.clone(),
            class0_color: self.config.report.class0_color.clone(),
            max_alpha: self.config.report.max_alpha,
            ..Palette::default()
        };
        palette.validate()?;
        Ok(palette)
    }

    fn render_report(&mut self) -> Result<()> {
        self.ensure_annotations()?;
        self.ensure_bias()?;
        self.ensure_errors()?;
        let palette = self.palette()?;
        let analysis = self.primary_analysis()?;
        let k = self.config.aggregation.top_k;
        let annotations = self.annotations.as_ref().expect("ensured above");
        let bias_rows = self.bias_rows.as_ref().expect("ensured above");
        let errors = self.errors.as_ref().expect("ensured above");

        let tables1: Vec<&TokenImportanceTable> =
            analysis.segments.iter().map(|s| &s.class1).collect();
        let tables0: Vec<&TokenImportanceTable> =
            analysis.segments.iter().map(|s| &s.class0).collect();

        let meanings: HashMap<String, Meaning> = annotations
            .meanings
            .iter()
            .map(|m| (m.token.clone(), m.meaning.clone()))
            .collect();
        let meaning_fn = meaning_annotator(&meanings, &palette);
        let sentiment_fn = sentiment_annotator(&self.inputs.sentiment, &palette);
        let pos_fn = pos_annotator(&self.inputs.pos, &palette);

        let grid_pair = |annotate: &dyn Fn(&str, &str) -> CellAnnotation| -> String {
            format!(
                "<h3>Tokens contributing to class 1</h3>\n{}\n\
                 <h3>Tokens contributing to class 0</h3>\n{}",
                render_importance_grid(&tables1, k, annotate),
                render_importance_grid(&tables0, k, annotate)
            )
        };
        let meaning_body = format!(
            "<p>Cell color encodes the token&#39;s embedding-similarity difference \
             toward the class-1 anchors ({}) versus the class-0 anchors ({}): darker \
             blue leans class 1, darker orange leans class 0.</p>\n{}",
            crate::report::escape_html(&annotations.anchors_class1.join(", ")),
            crate::report::escape_html(&annotations.anchors_class0.join(", ")),
            grid_pair(&meaning_fn)
        );
        let (positive_words, negative_words) = self.inputs.sentiment.sizes();
        let sentiment_body = format!(
            "<p>Cell color encodes opinion-lexicon polarity ({negative_words} negative, \
             {positive_words} positive words); unmatched tokens are uncolored.</p>\n{}",
            grid_pair(&sentiment_fn)
        );
        let pos_legend: String = palette
            .pos_colors
            .iter()
            .map(|(group, color)| {
                format!(
                    "<span style=\"background-color:{color}\">{}</span> ",
                    crate::report::escape_html(group.name())
                )
            })
            .collect();
        let pos_body = format!(
            "<p>Cell color encodes the part-of-speech group: {}</p>\n{}",
            pos_legend.trim_end(),
            grid_pair(&pos_fn)
        );

        let unique_body = {
            let per_segment1: Vec<&TokenImportanceTable> = tables1
                .iter()
                .copied()
                .filter(|t| t.segment != crate::aggregation::FULL_DATA_SEGMENT)
                .collect();
            let per_segment0: Vec<&TokenImportanceTable> = tables0
                .iter()
                .copied()
                .filter(|t| t.segment != crate::aggregation::FULL_DATA_SEGMENT)
                .collect();
            if per_segment1.len() < 2 {
                "<p><em>Unique-token comparison needs at least two segments.</em></p>"
                    .to_string()
            } else {
                let unique1 = unique_top_tokens(&per_segment1, k)?;
                let unique0 = unique_top_tokens(&per_segment0, k)?;
                format!(
                    "<p>Tokens in one segment&#39;s top {k} list and no other&#39;s; \
                     the number is the token&#39;s rank within its segment.</p>\n{}{}",
                    render_unique_tokens_section("Toward class 1", &unique1),
                    render_unique_tokens_section("Toward class 0", &unique0)
                )
            }
        };

        let bias_body = format!(
            "<p>Anchor-similarity differences over the top {k} class-1 tokens; rows \
             with no flag are omitted here and retained in \
             <a href=\"data/gender_bias.json\">the data export</a>.</p>\n{}",
            render_bias_section(bias_rows, &palette)
        );

        let rate_note = "<p class=\"note\">Rates are class-conditional: false-positive \
                         cells divide by the cell&#39;s actual-negative count, \
                         false-negative cells by its actual-positive count.</p>\n";
        let errors_body = format!(
            "<h3>False positives</h3>\n{}\n<h3>False negatives</h3>\n{}\n{}{}{}",
            render_error_grid(&errors.grid_fp),
            render_error_grid(&errors.grid_fn),
            rate_note,
            render_representatives_section(
                "Representative false positives",
                &errors.reps_fp,
                &palette
            )?,
            render_representatives_section(
                "Representative false negatives",
                &errors.reps_fn,
                &palette
            )?,
        );

        let performance_body = format!(
            "<p>Class 1 is the positive class; F1 is the exact harmonic mean of \
             precision and recall.</p>\n{}",
            render_performance_section(&errors.confusion_rows)
        );

        let sections = vec![
            SectionPage {
                slug: "performance".to_string(),
                title: "Performance by segment".to_string(),
                body_html: performance_body,
            },
            SectionPage {
                slug: "importance_meaning".to_string(),
                title: "Token importance by meaning".to_string(),
                body_html: meaning_body,
            },
            SectionPage {
                slug: "importance_sentiment".to_string(),
                title: "Token importance by sentiment".to_string(),
                body_html: sentiment_body,
            },
            SectionPage {
                slug: "importance_pos".to_string(),
                title: "Token importance by part of speech".to_string(),
                body_html: pos_body,
            },
            SectionPage {
                slug: "unique_tokens".to_string(),
                title: "Segment-unique tokens".to_string(),
                body_html: unique_body,
            },
            SectionPage {
                slug: "gender_bias".to_string(),
                title: "Gender bias scan".to_string(),
                body_html: bias_body,
            },
            SectionPage {
                slug: "error_analysis".to_string(),
                title: "Error analysis".to_string(),
                body_html: errors_body,
            },
        ];

        let out = &self.config.out_dir;
        let unique_csv = {
            let mut text = String::from("direction,segment,rank,token\n");
            let per_segment = |tables: &[&TokenImportanceTable],
                               direction: &str,
                               text: &mut String|
             -> Result<()> {
                let per: Vec<&TokenImportanceTable> = tables
                    .iter()
                    .copied()
                    .filter(|t| t.segment != crate::aggregation::FULL_DATA_SEGMENT)
                    .collect();
                if per.len() >= 2 {
                    for (segment, rows) in unique_top_tokens(&per, k)? {
                        for row in rows {
                            text.push_str(&format!(
                                "{direction},{},{},{}\n",
                                csv_quote(&segment),
                                row.rank,
                                csv_quote(&row.token)
                            ));
                        }
                    }
                }
                Ok(())
            };
            per_segment(&tables1, "class1", &mut text)?;
            per_segment(&tables0, "class0", &mut text)?;
            text
        };
        let tables = vec![
            ("performance.csv".to_string(), read_text(&out.join("confusion.csv"))?),
            (
                "importance_meaning_class1.csv".to_string(),
                importance_grid_csv(&tables1, k, &meaning_fn),
            ),
            (
                "importance_meaning_class0.csv".to_string(),
                importance_grid_csv(&tables0, k, &meaning_fn),
            ),
            (
                "importance_sentiment_class1.csv".to_string(),
                importance_grid_csv(&tables1, k, &sentiment_fn),
            ),
            (
                "importance_sentiment_class0.csv".to_string(),
                importance_grid_csv(&tables0, k, &sentiment_fn),
            ),
            (
                "importance_pos_class1.csv".to_string(),
                importance_grid_csv(&tables1, k, &pos_fn),
            ),
            (
                "importance_pos_class0.csv".to_string(),
                importance_grid_csv(&tables0, k, &pos_fn),
            ),
            ("unique_tokens.csv".to_string(), unique_csv),
            ("gender_bias.csv".to_string(), read_text(&out.join("bias.csv"))?),
            ("errors_fp.csv".to_string(), read_text(&out.join("errors_fp.csv"))?),
            ("errors_fn.csv".to_string(), read_text(&out.join("errors_fn.csv"))?),
        ];

        #[derive(Serialize)]
        struct GridExport<'a> {
            false_positives: &'a ErrorGrid,
            false_negatives: &'a ErrorGrid,
        }
        #[derive(Serialize)]
        struct PerformanceExport<'a> {
            rows: &'a [(String, ConfusionMatrix)],
        }
        #[derive(Serialize)]
        struct RepresentativesExport<'a> {
            false_positives: &'a [(String, Vec<RepresentativeExample>)],
            false_negatives: &'a [(String, Vec<RepresentativeExample>)],
        }
        let data = vec![
            ("importance.json".to_string(), pretty_json(analysis)?),
            ("annotations.json".to_string(), pretty_json(annotations)?),
            ("gender_bias.json".to_string(), pretty_json(bias_rows)?),
            (
                "performance.json".to_string(),
                pretty_json(&PerformanceExport {
                    rows: &errors.confusion_rows,
                })?,
            ),
            (
                "error_grids.json".to_string(),
                pretty_json(&GridExport {
                    false_positives: &errors.grid_fp,
                    false_negatives: &errors.grid_fn,
                })?,
            ),
            (
                "representatives.json".to_string(),
                pretty_json(&RepresentativesExport {
                    false_positives: &errors.reps_fp,
                    false_negatives: &errors.reps_fn,
                })?,
            ),
        ];

        let bundle = ReportBundle {
            title: self.config.report.title.clone(),
            stamp: self.stamp.clone(),
            sections,
            tables,
            data,
        };
        emit_report(&out.join("report"), &bundle)?;
        log::info!(
            "stage report: bundle with {} sections at {}",
            bundle.sections.len(),
            out.join("report").display()
        );
        Ok(())
    }
}
