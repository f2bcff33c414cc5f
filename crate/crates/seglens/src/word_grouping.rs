//! Annotation of ranked token lists by word group: binary sentiment lexicon,
//! part-of-speech family, embedding-meaning buckets, and the anchor-pair
//! (e.g. gender) bias scan.
//!
//! All lookups are pure functions over immutable lexicons and embedding
//! tables, so annotating a list is trivially order-independent apart from
//! the retained rank field.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::embeddings::{EmbeddingTable, ResolvedAnchorSet};
use crate::{Result, SeglensError};

const BUNDLED_POSITIVE: &str = include_str!("assets/sentiment_positive.txt");
const BUNDLED_NEGATIVE: &str = include_str!("assets/sentiment_negative.txt");
const BUNDLED_POS_LEXICON: &str = include_str!("assets/pos_lexicon.tsv");

/// Default magnitude edges separating the four meaning buckets.
pub const DEFAULT_MEANING_EDGES: [f64; 3] = [0.05, 0.10, 0.20];

/// Default threshold above which a similarity difference is significant.
pub const DEFAULT_SIGNIFICANT: f64 = 0.1;

/// Default threshold above which a similarity difference is strong.
pub const DEFAULT_STRONG: f64 = 0.2;

// ---------------------------------------------------------------------------
// Sentiment
// ---------------------------------------------------------------------------

/// Binary sentiment category of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentTag {
    /// In the positive word list.
    Positive,
    /// In the negative word list.
    Negative,
    /// In neither list.
    Unmatched,
}

impl SentimentTag {
    /// Stable lowercase name.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            SentimentTag::Positive => "positive",
            SentimentTag::Negative => "negative",
            SentimentTag::Unmatched => "unmatched",
        }
    }
}

/// Disjoint positive/negative opinion-word lists.
#[derive(Debug, Clone)]
pub struct SentimentLexicon {
    positive: BTreeSet<String>,
    negative: BTreeSet<String>,
}

impl SentimentLexicon {
    /// Build a lexicon, rejecting any overlap between the two lists.
    pub fn new(positive: BTreeSet<String>, negative: BTreeSet<String>) -> Result<Self> {
        let overlap: Vec<&str> = positive
            .intersection(&negative)
            .map(String::as_str)
            .collect();
        if !overlap.is_empty() {
            return Err(SeglensError::InvalidConfig(format!(
                "sentiment lists overlap on: {}",
                overlap.join(", ")
            )));
        }
        Ok(SentimentLexicon { positive, negative })
    }

    /// The lexicon bundled with the crate.
    #[must_use]
    pub fn bundled() -> Self {
        SentimentLexicon::new(
            parse_word_list(BUNDLED_POSITIVE),
            parse_word_list(BUNDLED_NEGATIVE),
        )
        .expect("bundled sentiment lists are disjoint")
    }

    /// Load a lexicon from two word-list files.
    pub fn load(positive_path: &Path, negative_path: &Path) -> Result<Self> {
        SentimentLexicon::new(load_word_list(positive_path)?, load_word_list(negative_path)?)
    }

    /// Number of (positive, negative) entries.
    #[must_use]
    pub fn sizes(&self) -> (usize, usize) {
        (self.positive.len(), self.negative.len())
    }

    /// Category of a token (matched case-sensitively; lists are lowercase).
    #[must_use]
    pub fn tag(&self, token: &str) -> SentimentTag {
        if self.positive.contains(token) {
            SentimentTag::Positive
        } else if self.negative.contains(token) {
            SentimentTag::Negative
        } else {
            SentimentTag::Unmatched
        }
    }
}

fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Load a plain-text word list: one token per line, `#` comments and blank
/// lines skipped, lowercased and deduplicated.
pub fn load_word_list(path: &Path) -> Result<BTreeSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_word_list(&text))
}

// ---------------------------------------------------------------------------
// Part of speech
// ---------------------------------------------------------------------------

/// Coarse part-of-speech family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PosGroup {
    /// Adjectives including comparative and superlative forms.
    AdjectiveFamily,
    /// Adverbs.
    Adverb,
    /// Verbs in all forms, plus the small determiner/interjection classes.
    VerbFamily,
    /// Plural nouns.
    PluralNoun,
    /// Singular nouns.
    Noun,
}

impl PosGroup {
    /// Stable lowercase name.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            PosGroup::AdjectiveFamily => "adjective_family",
            PosGroup::Adverb => "adverb",
            PosGroup::VerbFamily => "verb_family",
            PosGroup::PluralNoun => "plural_noun",
            PosGroup::Noun => "noun",
        }
    }

    /// Parse a stable name back into a group.
    #[must_use]
    pub fn from_name(name: &str) -> Option<PosGroup> {
        match name {
            "adjective_family" => Some(PosGroup::AdjectiveFamily),
            "adverb" => Some(PosGroup::Adverb),
            "verb_family" => Some(PosGroup::VerbFamily),
            "plural_noun" => Some(PosGroup::PluralNoun),
            "noun" => Some(PosGroup::Noun),
            _ => None,
        }
    }
}

/// The default tag-to-group mapping: adjective forms together, all verb-like
/// tags (plus the tiny determiner/interjection classes) together, and nouns
/// split singular/plural.
#[must_use]
pub fn default_pos_groups() -> HashMap<String, PosGroup> {
    let entries = [
        ("Adjective", PosGroup::AdjectiveFamily),
        ("Comparative adjective", PosGroup::AdjectiveFamily),
        ("Superlative adjective", PosGroup::AdjectiveFamily),
        ("Adverb", PosGroup::Adverb),
        ("Determiner", PosGroup::VerbFamily),
        ("Interjection", PosGroup::VerbFamily),
        ("Past participle", PosGroup::VerbFamily),
        ("Past tense verb", PosGroup::VerbFamily),
        ("Present tense verb", PosGroup::VerbFamily),
        ("Verb", PosGroup::VerbFamily),
        ("Verb gerund", PosGroup::VerbFamily),
        ("Plural noun", PosGroup::PluralNoun),
        ("Noun", PosGroup::Noun),
    ];
    entries
        .into_iter()
        .map(|(tag, group)| (tag.to_string(), group))
        .collect()
}

/// A token → POS-tag lexicon with a total tag → group mapping.
#[derive(Debug, Clone)]
pub struct PosLexicon {
    tag_of: HashMap<String, String>,
    group_of: HashMap<String, PosGroup>,
}

impl PosLexicon {
    /// Build a lexicon, rejecting tags that the group map does not cover.
    pub fn new(
        tag_of: HashMap<String, String>,
        group_of: HashMap<String, PosGroup>,
    ) -> Result<Self> {
        let mut unmapped: Vec<&str> = tag_of
            .values()
            .filter(|tag| !group_of.contains_key(*tag))
            .map(String::as_str)
            .collect();
        unmapped.sort_unstable();
        unmapped.dedup();
        if !unmapped.is_empty() {
            return Err(SeglensError::InvalidConfig(format!(
                "part-of-speech tags without a group mapping: {}",
                unmapped.join(", ")
            )));
        }
        Ok(PosLexicon { tag_of, group_of })
    }

    /// The lexicon bundled with the crate, under the default group map.
    #[must_use]
    pub fn bundled() -> Self {
        PosLexicon::parse(BUNDLED_POS_LEXICON, default_pos_groups())
            .expect("bundled part-of-speech lexicon is well-formed")
    }

    /// Load a `token<TAB>tag` TSV under the given group map.
    pub fn load(path: &Path, group_of: HashMap<String, PosGroup>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SeglensError::ReadInput {
            path: path.display().to_string(),
            source,
        })?;
        PosLexicon::parse(&text, group_of)
    }

    /// Parse TSV text: `#` comments and blank lines skipped, tokens
    /// lowercased, duplicate tokens resolved last-wins with a warning.
    pub fn parse(text: &str, group_of: HashMap<String, PosGroup>) -> Result<Self> {
        let mut tag_of = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (token, tag) = line.split_once('\t').ok_or_else(|| {
                SeglensError::InvalidInput {
                    path: "part-of-speech lexicon".to_string(),
                    line: i + 1,
                    message: format!("expected token<TAB>tag, got {line:?}"),
                }
            })?;
            let token = token.trim().to_lowercase();
            let tag = tag.trim().to_string();
            if token.is_empty() || tag.is_empty() {
                return Err(SeglensError::InvalidInput {
                    path: "part-of-speech lexicon".to_string(),
                    line: i + 1,
                    message: "empty token or tag".to_string(),
                });
            }
            if tag_of.insert(token.clone(), tag).is_some() {
                log::warn!("duplicate part-of-speech entry for {token:?}; keeping the last");
            }
        }
        PosLexicon::new(tag_of, group_of)
    }

    /// The raw tag of a token, if the lexicon knows it.
    #[must_use]
    pub fn tag(&self, token: &str) -> Option<&str> {
        self.tag_of.get(token).map(String::as_str)
    }

    /// The group of a token; `None` means the token is unmatched.
    #[must_use]
    pub fn group(&self, token: &str) -> Option<PosGroup> {
        self.tag_of.get(token).map(|tag| self.group_of[tag])
    }

    /// Number of tokens in the lexicon.
    #[must_use]
    pub fn len(&self) -> usize {
        self.tag_of.len()
    }

    /// Whether the lexicon is empty.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.tag_of.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Meaning buckets and bias flags
// ---------------------------------------------------------------------------

/// Which anchor set a similarity difference leans toward
/// (`a` is the first set of the pair; difference > 0 means toward `a`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lean {
    /// Positive difference.
    TowardA,
    /// Negative difference.
    TowardB,
    /// Exactly zero difference.
    None,
}

impl Lean {
    fn of(difference: f64) -> Lean {
        if difference > 0.0 {
            Lean::TowardA
        } else if difference < 0.0 {
            Lean::TowardB
        } else {
            Lean::None
        }
    }

    /// Stable lowercase name.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Lean::TowardA => "toward_a",
            Lean::TowardB => "toward_b",
            Lean::None => "none",
        }
    }
}

/// Magnitude class of a similarity difference under a significant/strong
/// threshold pair. Boundaries are strict: a difference exactly at a
/// threshold does not cross it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasFlag {
    /// `|difference|` at or below the significant threshold.
    None,
    /// Strictly above significant, at or below strong.
    Significant,
    /// Strictly above strong.
    Strong,
}

impl BiasFlag {
    /// Stable lowercase name.
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            BiasFlag::None => "none",
            BiasFlag::Significant => "significant",
            BiasFlag::Strong => "strong",
        }
    }
}

/// Classify a similarity difference against a threshold pair.
#[must_use]
pub fn bias_flag(difference: f64, significant: f64, strong: f64) -> BiasFlag {
    let magnitude = difference.abs();
    if magnitude > strong {
        BiasFlag::Strong
    } else if magnitude > significant {
        BiasFlag::Significant
    } else {
        BiasFlag::None
    }
}

/// The 1-based meaning bucket of a difference: one plus the number of edges
/// strictly below `|difference|`, so `edges.len() + 1` buckets in total.
pub fn meaning_bucket(difference: f64, edges: &[f64]) -> Result<usize> {
    validate_edges(edges)?;
    let magnitude = difference.abs();
    Ok(1 + edges.iter().filter(|&&e| e < magnitude).count())
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    let ascending = edges.windows(2).all(|w| w[0] < w[1]);
    if edges.is_empty() || !ascending || edges.iter().any(|e| !e.is_finite() || *e <= 0.0) {
        return Err(SeglensError::InvalidConfig(format!(
            "meaning bucket edges must be positive, finite and strictly ascending, got {edges:?}"
        )));
    }
    Ok(())
}

/// How a token relates in meaning to an anchor pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Meaning {
    /// The token has a vector; difference and bucket are defined.
    Scored {
        /// Similarity difference toward the first anchor set.
        difference: f64,
        /// 1-based magnitude bucket.
        bucket: usize,
        /// Sign of the difference.
        lean: Lean,
    },
    /// The token has no embedding vector.
    NoEmbedding,
}

/// One annotated token of a ranked list.
#[derive(Debug, Clone, Serialize)]
pub struct MeaningAnnotation {
    /// The token.
    pub token: String,
    /// Rank within the input list (position, starting at 0).
    pub rank: usize,
    /// The annotation.
    pub meaning: Meaning,
}

/// Annotate a ranked token list by similarity difference toward an anchor
/// pair, bucketed by magnitude. Out-of-vocabulary tokens are annotated
/// [`Meaning::NoEmbedding`] rather than dropped.
pub fn meaning_annotate(
    tokens: &[&str],
    anchors_a: &ResolvedAnchorSet,
    anchors_b: &ResolvedAnchorSet,
    table: &EmbeddingTable,
    edges: &[f64],
) -> Result<Vec<MeaningAnnotation>> {
    validate_edges(edges)?;
    let mut out = Vec::with_capacity(tokens.len());
    for (rank, &token) in tokens.iter().enumerate() {
        let meaning = if table.contains(token) {
            let difference = table.similarity_difference(token, anchors_a, anchors_b)?;
            Meaning::Scored {
                difference,
                bucket: meaning_bucket(difference, edges)?,
                lean: Lean::of(difference),
            }
        } else {
            Meaning::NoEmbedding
        };
        out.push(MeaningAnnotation {
            token: token.to_string(),
            rank,
            meaning,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Bias scan
// ---------------------------------------------------------------------------

/// One row of an anchor-pair bias scan.
#[derive(Debug, Clone, Serialize)]
pub struct BiasRow {
    /// The token.
    pub token: String,
    /// Rank within the input list (position, starting at 0).
    pub rank: usize,
    /// Mean cosine similarity to the first anchor set.
    pub sim_a: f64,
    /// Mean cosine similarity to the second anchor set.
    pub sim_b: f64,
    /// `sim_a - sim_b`.
    pub difference: f64,
    /// Magnitude class of the difference.
    pub flag: BiasFlag,
    /// Sign of the difference.
    pub direction: Lean,
}

/// Scan a ranked token list for association bias toward one of two anchor
/// sets (the worked default being male/female anchors). Produces one row per
/// in-vocabulary token — including unflagged ones, so the full data is
/// retained and views can filter. Thresholds must satisfy
/// `0 < significant < strong`.
pub fn gender_bias_scan(
    tokens: &[&str],
    table: &EmbeddingTable,
    anchors_a: &ResolvedAnchorSet,
    anchors_b: &ResolvedAnchorSet,
    significant: f64,
    strong: f64,
) -> Result<Vec<BiasRow>> {
    if !(significant > 0.0 && strong > significant) || !strong.is_finite() {
        return Err(SeglensError::InvalidConfig(format!(
            "bias thresholds must satisfy 0 < significant < strong, \
             got significant={significant}, strong={strong}"
        )));
    }
    let mut out = Vec::new();
    for (rank, &token) in tokens.iter().enumerate() {
        if !table.contains(token) {
            continue;
        }
        let sim_a = table.anchor_similarity(token, anchors_a)?;
        let sim_b = table.anchor_similarity(token, anchors_b)?;
        let difference = sim_a - sim_b;
        out.push(BiasRow {
            token: token.to_string(),
            rank,
            sim_a,
            sim_b,
            difference,
            flag: bias_flag(difference, significant, strong),
            direction: Lean::of(difference),
        });
    }
    Ok(out)
}

/// Write bias rows as CSV with columns
/// `token,rank,sim_male,sim_female,difference,flag`
/// (the column names reflect the worked gender default; for other anchor
/// pairs the `a` set maps to the first similarity column).
pub fn write_bias_csv(path: &Path, rows: &[BiasRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let io_err = |e: csv::Error| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    writer
        .write_record(["token", "rank", "sim_male", "sim_female", "difference", "flag"])
        .map_err(io_err)?;
    for row in rows {
        writer
            .write_record([
                row.token.as_str(),
                &row.rank.to_string(),
                &row.sim_a.to_string(),
                &row.sim_b.to_string(),
                &row.difference.to_string(),
                row.flag.name(),
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}
