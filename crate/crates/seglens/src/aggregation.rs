//! Aggregation of per-occurrence attribution scores into per-segment token
//! importance tables.
//!
//! For every segment (plus a synthetic `full_data` segment covering all
//! analyzed messages) the scores of each token are summed into a total
//! relevance. Tokens with positive totals form the class-1 table, negative
//! totals the class-0 table, and exact-zero totals are dropped. Rare tokens
//! are removed by an adaptive document-frequency threshold computed per
//! segment.
//!
//! Determinism contract: message contributions are accumulated in corpus
//! order, and the `full_data` totals are the per-segment totals folded in
//! segment display order, so equal inputs reproduce bit-equal tables.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attribution::AttributionSet;
use crate::corpus::TokenizedCorpus;
use crate::segmentation::SegmentAssignment;
use crate::{Result, SeglensError};

/// Name of the synthetic segment covering every analyzed message.
pub const FULL_DATA_SEGMENT: &str = "full_data";

/// Which statistic orders the table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RankingStatistic {
    /// Total relevance divided by within-segment document frequency.
    #[default]
    MeanRelevance,
    /// Plain total relevance.
    TotalRelevance,
}

/// Which messages participate in the aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MessageFilter {
    /// Every message.
    #[default]
    All,
    /// Only messages with actual label 1.
    Label1,
    /// Only messages with actual label 0.
    Label0,
}

impl MessageFilter {
    fn accepts(self, label: u8) -> bool {
        match self {
            MessageFilter::All => true,
            MessageFilter::Label1 => label == 1,
            MessageFilter::Label0 => label == 0,
        }
    }
}

/// Aggregation knobs.
#[derive(Debug, Clone)]
pub struct AggregationOptions {
    /// Fraction of the segment size that sets the document-frequency
    /// threshold (see [`active_threshold`]).
    pub min_freq_fraction: f64,
    /// Row ordering statistic.
    pub ranking: RankingStatistic,
    /// Message filter applied before aggregation.
    pub filter: MessageFilter,
}

impl Default for AggregationOptions {
    fn default() -> Self {
        AggregationOptions {
            min_freq_fraction: 1e-4,
            ranking: RankingStatistic::MeanRelevance,
            filter: MessageFilter::All,
        }
    }
}

/// One ranked token in an importance table.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceRow {
    /// Rank within the table, starting at 0.
    pub rank: usize,
    /// The token.
    pub token: String,
    /// Sum of all occurrence scores across the segment's messages.
    pub total_relevance: f64,
    /// `total_relevance / doc_frequency`.
    pub mean_relevance: f64,
    /// Number of the segment's analyzed messages containing the token.
    pub doc_frequency: usize,
}

impl ImportanceRow {
    fn statistic(&self, ranking: RankingStatistic) -> f64 {
        match ranking {
            RankingStatistic::MeanRelevance => self.mean_relevance,
            RankingStatistic::TotalRelevance => self.total_relevance,
        }
    }
}

/// Which class a table's tokens push toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Tokens with positive total relevance (supporting class 1).
    Class1,
    /// Tokens with negative total relevance (supporting class 0).
    Class0,
}

impl Direction {
    /// Stable lowercase name (`class1` / `class0`).
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            Direction::Class1 => "class1",
            Direction::Class0 => "class0",
        }
    }
}

/// A ranked token importance table for one segment and direction.
#[derive(Debug, Clone, Serialize)]
pub struct TokenImportanceTable {
    /// Segment label.
    pub segment: String,
    /// Table direction.
    pub direction: Direction,
    /// Rows sorted by ranking-statistic magnitude (descending), ties broken
    /// by token.
    pub rows: Vec<ImportanceRow>,
}

impl TokenImportanceTable {
    /// The first `k` rows.
    #[must_use]
    pub fn top_k(&self, k: usize) -> &[ImportanceRow] {
        &self.rows[..k.min(self.rows.len())]
    }
}

/// Both tables for one segment, plus its bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentTables {
    /// Segment label.
    pub segment: String,
    /// Number of analyzed (filter-passing) messages in the segment.
    pub size: usize,
    /// The document-frequency threshold that was applied.
    pub threshold: usize,
    /// Table of tokens pushing toward class 1.
    pub class1: TokenImportanceTable,
    /// Table of tokens pushing toward class 0.
    pub class0: TokenImportanceTable,
}

/// The full aggregation result for one segmentation scheme.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceAnalysis {
    /// Segmentation scheme name.
    pub scheme: String,
    /// The configured threshold fraction.
    pub min_freq_fraction: f64,
    /// The configured row ordering.
    pub ranking: RankingStatistic,
    /// The configured message filter.
    pub filter: MessageFilter,
    /// `full_data` first, then every segment in display order.
    pub segments: Vec<SegmentTables>,
}

impl ImportanceAnalysis {
    /// The tables for a segment label.
    #[must_use]
    pub fn segment(&self, label: &str) -> Option<&SegmentTables> {
        self.segments.iter().find(|s| s.segment == label)
    }

    /// The `full_data` tables.
    #[must_use]
    pub fn full_data(&self) -> &SegmentTables {
        self.segment(FULL_DATA_SEGMENT)
            .expect("full_data segment is always produced")
    }
}

/// The active document-frequency threshold for a segment of `segment_size`
/// analyzed messages: `max(1, ceil(min_freq_fraction * segment_size))`.
#[must_use]
pub fn active_threshold(min_freq_fraction: f64, segment_size: usize) -> usize {
    let raw = (min_freq_fraction * segment_size as f64).ceil();
    (raw as usize).max(1)
}

#[derive(Default, Clone)]
struct Accumulator {
    // token -> (running total in message order, document frequency)
    tokens: HashMap<String, (f64, usize)>,
    size: usize,
}

/// Aggregate attribution scores into per-segment importance tables.
///
/// Every filter-passing message must have an attribution record; the
/// assignment must cover the corpus exactly; no segment may be named
/// `full_data` (that label is reserved for the synthetic all-messages
/// segment, which is always produced).
pub fn aggregate_token_importance(
    corpus: &TokenizedCorpus,
    attributions: &AttributionSet,
    assignment: &SegmentAssignment,
    options: &AggregationOptions,
) -> Result<ImportanceAnalysis> {
    if !options.min_freq_fraction.is_finite()
        || !(0.0..=1.0).contains(&options.min_freq_fraction)
    {
        return Err(SeglensError::InvalidConfig(format!(
            "minimum frequency fraction {} is outside [0, 1]",
            options.min_freq_fraction
        )));
    }
    assignment.validate_against(corpus)?;
    if assignment
        .segments()
        .iter()
        .any(|s| s == FULL_DATA_SEGMENT)
    {
        return Err(SeglensError::InvalidConfig(format!(
            "segment label {FULL_DATA_SEGMENT:?} is reserved"
        )));
    }

    let mut accumulators: HashMap<&str, Accumulator> = assignment
        .segments()
        .iter()
        .map(|s| (s.as_str(), Accumulator::default()))
        .collect();

    for message in corpus.messages() {
        if !options.filter.accepts(message.label) {
            continue;
        }
        let record = attributions.get(&message.id).ok_or_else(|| {
            SeglensError::DataMismatch(format!(
                "message {:?} has no attribution record",
                message.id
            ))
        })?;
        let segment = assignment.get(&message.id).expect("validated coverage");
        let acc = accumulators.get_mut(segment).expect("known segment");
        acc.size += 1;

        // Per-message token totals, in first-occurrence order.
        let mut order: Vec<&str> = Vec::new();
        let mut message_totals: HashMap<&str, f64> = HashMap::new();
        for (token, &score) in record.tokens.iter().zip(&record.scores) {
            message_totals
                .entry(token.as_str())
                .and_modify(|t| *t += score)
                .or_insert_with(|| {
                    order.push(token.as_str());
                    score
                });
        }
        for token in order {
            let contribution = message_totals[token];
            let entry = acc
                .tokens
                .entry(token.to_string())
                .or_insert((0.0, 0));
            entry.0 += contribution;
            entry.1 += 1;
        }
    }

    // full_data: fold the per-segment accumulators in display order so that
    // cross-segment totals add up exactly.
    let mut full = Accumulator::default();
    for label in assignment.segments() {
        let acc = &accumulators[label.as_str()];
        full.size += acc.size;
        let mut tokens: Vec<&String> = acc.tokens.keys().collect();
        tokens.sort_unstable();
        for token in tokens {
            let &(total, df) = &acc.tokens[token];
            let entry = full.tokens.entry(token.clone()).or_insert((0.0, 0));
            entry.0 += total;
            entry.1 += df;
        }
    }

    let mut segments = Vec::with_capacity(assignment.segments().len() + 1);
    segments.push(build_segment_tables(
        FULL_DATA_SEGMENT,
        &full,
        options,
    ));
    for label in assignment.segments() {
        segments.push(build_segment_tables(
            label,
            &accumulators[label.as_str()],
            options,
        ));
    }

    Ok(ImportanceAnalysis {
        scheme: assignment.scheme().to_string(),
        min_freq_fraction: options.min_freq_fraction,
        ranking: options.ranking,
        filter: options.filter,
        segments,
    })
}

fn build_segment_tables(
    label: &str,
    acc: &Accumulator,
    options: &AggregationOptions,
) -> SegmentTables {
    let threshold = active_threshold(options.min_freq_fraction, acc.size);
    let mut class1 = Vec::new();
    let mut class0 = Vec::new();
    for (token, &(total, df)) in &acc.tokens {
        if df < threshold || total == 0.0 {
            continue;
        }
        let row = ImportanceRow {
            rank: 0,
            token: token.clone(),
            total_relevance: total,
            mean_relevance: total / df as f64,
            doc_frequency: df,
        };
        if total > 0.0 {
            class1.push(row);
        } else {
            class0.push(row);
        }
    }
    let ranking = options.ranking;
    let order = |a: &ImportanceRow, b: &ImportanceRow| {
        b.statistic(ranking)
            .abs()
            .partial_cmp(&a.statistic(ranking).abs())
            .expect("finite statistics")
            .then_with(|| a.token.cmp(&b.token))
    };
    class1.sort_by(order);
    class0.sort_by(order);
    for (i, row) in class1.iter_mut().enumerate() {
        row.rank = i;
    }
    for (i, row) in class0.iter_mut().enumerate() {
        row.rank = i;
    }
    SegmentTables {
        segment: label.to_string(),
        size: acc.size,
        threshold,
        class1: TokenImportanceTable {
            segment: label.to_string(),
            direction: Direction::Class1,
            rows: class1,
        },
        class0: TokenImportanceTable {
            segment: label.to_string(),
            direction: Direction::Class0,
            rows: class0,
        },
    }
}

/// Tokens of each table's top `k` that appear in no other table's top `k`;
/// within-table rank order is preserved. Needs at least two tables.
pub fn unique_top_tokens(
    tables: &[&TokenImportanceTable],
    k: usize,
) -> Result<Vec<(String, Vec<ImportanceRow>)>> {
    if tables.len() < 2 {
        return Err(SeglensError::InvalidConfig(format!(
            "unique-token comparison needs at least 2 tables, got {}",
            tables.len()
        )));
    }
    let tops: Vec<&[ImportanceRow]> = tables.iter().map(|t| t.top_k(k)).collect();
    let mut result = Vec::with_capacity(tables.len());
    for (i, table) in tables.iter().enumerate() {
        let unique: Vec<ImportanceRow> = tops[i]
            .iter()
            .filter(|row| {
                tops.iter().enumerate().all(|(j, other)| {
                    j == i || !other.iter().any(|r| r.token == row.token)
                })
            })
            .cloned()
            .collect();
        result.push((table.segment.clone(), unique));
    }
    Ok(result)
}

/// Write an analysis as CSV with columns
/// `segment,direction,rank,token,total_relevance,mean_relevance,doc_frequency`.
pub fn write_importance_csv(path: &Path, analysis: &ImportanceAnalysis) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let io_err = |e: csv::Error| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    writer
        .write_record([
            "segment",
            "direction",
            "rank",
            "token",
            "total_relevance",
            "mean_relevance",
            "doc_frequency",
        ])
        .map_err(io_err)?;
    for seg in &analysis.segments {
        for table in [&seg.class1, &seg.class0] {
            for row in &table.rows {
                writer
                    .write_record([
                        seg.segment.as_str(),
                        table.direction.name(),
                        &row.rank.to_string(),
                        &row.token,
                        &row.total_relevance.to_string(),
                        &row.mean_relevance.to_string(),
                        &row.doc_frequency.to_string(),
                    ])
                    .map_err(io_err)?;
            }
        }
    }
    writer.flush().map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::AttributionRecord;
    use crate::corpus::TokenizedMessage;
    use std::collections::BTreeMap;

    fn message(id: &str, label: u8, tokens: &[&str]) -> TokenizedMessage {
        TokenizedMessage {
            id: id.to_string(),
            label,
            metadata: BTreeMap::new(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn record(id: &str, tokens: &[&str], scores: &[f64]) -> AttributionRecord {
        AttributionRecord {
            id: id.to_string(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            scores: scores.to_vec(),
            prob: 0.5,
        }
    }

    fn single_segment(corpus: &TokenizedCorpus) -> SegmentAssignment {
        let labels = corpus
            .messages()
            .iter()
            .map(|m| (m.id.clone(), "all".to_string()))
            .collect();
        SegmentAssignment::new("test", labels, vec!["all".to_string()]).expect("assignment")
    }

    #[test]
    fn threshold_follows_the_ceiling_rule() {
        assert_eq!(active_threshold(1e-4, 0), 1);
        assert_eq!(active_threshold(1e-4, 1), 1);
        assert_eq!(active_threshold(1e-4, 5000), 1);
        assert_eq!(active_threshold(1e-4, 25000), 3);
        assert_eq!(active_threshold(0.0, 1000), 1);
        assert_eq!(active_threshold(0.5, 7), 4);
        assert_eq!(active_threshold(1.0, 9), 9);
    }

    #[test]
    fn totals_sign_split_and_means() {
        let corpus = TokenizedCorpus::from_messages(vec![
            message("m1", 1, &["bad"]),
            message("m2", 0, &["bad", "good"]),
        ])
        .expect("corpus");
        let attributions = AttributionSet::from_records(vec![
            record("m1", &["bad"], &[2.0]),
            record("m2", &["bad", "good"], &[1.0, -3.0]),
        ])
        .expect("set");
        let assignment = single_segment(&corpus);
        let analysis = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect("aggregate");

        let seg = analysis.segment("all").expect("segment");
        assert_eq!(seg.size, 2);
        assert_eq!(seg.threshold, 1);
        assert_eq!(seg.class1.rows.len(), 1);
        let bad = &seg.class1.rows[0];
        assert_eq!(bad.token, "bad");
        assert_eq!(bad.total_relevance, 3.0);
        assert_eq!(bad.doc_frequency, 2);
        assert_eq!(bad.mean_relevance, 1.5);
        assert_eq!(seg.class0.rows.len(), 1);
        let good = &seg.class0.rows[0];
        assert_eq!(good.token, "good");
        assert_eq!(good.total_relevance, -3.0);
        assert_eq!(good.mean_relevance, -3.0);

        // The synthetic full_data segment equals the single real segment.
        let full = analysis.full_data();
        assert_eq!(full.class1.rows[0].total_relevance, 3.0);
        assert_eq!(full.class0.rows[0].total_relevance, -3.0);
        assert_eq!(full.size, 2);
    }

    #[test]
    fn zero_total_tokens_appear_in_neither_table() {
        let corpus = TokenizedCorpus::from_messages(vec![
            message("m1", 1, &["x"]),
            message("m2", 0, &["x"]),
        ])
        .expect("corpus");
        let attributions = AttributionSet::from_records(vec![
            record("m1", &["x"], &[1.0]),
            record("m2", &["x"], &[-1.0]),
        ])
        .expect("set");
        let assignment = single_segment(&corpus);
        let analysis = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect("aggregate");
        let seg = analysis.segment("all").expect("segment");
        assert!(seg.class1.rows.is_empty());
        assert!(seg.class0.rows.is_empty());
    }

    #[test]
    fn repeated_occurrences_sum_within_a_message() {
        let corpus =
            TokenizedCorpus::from_messages(vec![message("m1", 1, &["bad", "bad", "ok"])])
                .expect("corpus");
        let attributions = AttributionSet::from_records(vec![record(
            "m1",
            &["bad", "bad", "ok"],
            &[0.75, 0.75, 0.5],
        )])
        .expect("set");
        let assignment = single_segment(&corpus);
        let analysis = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect("aggregate");
        let seg = analysis.segment("all").expect("segment");
        let bad = seg
            .class1
            .rows
            .iter()
            .find(|r| r.token == "bad")
            .expect("bad");
        assert_eq!(bad.total_relevance, 1.5);
        // One message contains it, so document frequency is 1.
        assert_eq!(bad.doc_frequency, 1);
        assert_eq!(bad.mean_relevance, 1.5);
    }

    #[test]
    fn rows_sort_by_statistic_magnitude_with_lexicographic_ties() {
        let corpus = TokenizedCorpus::from_messages(vec![message(
            "m1",
            1,
            &["small", "big", "zeta", "alpha"],
        )])
        .expect("corpus");
        let attributions = AttributionSet::from_records(vec![record(
            "m1",
            &["small", "big", "zeta", "alpha"],
            &[0.25, 2.0, 1.0, 1.0],
        )])
        .expect("set");
        let assignment = single_segment(&corpus);
        let analysis = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect("aggregate");
        let rows = &analysis.segment("all").expect("segment").class1.rows;
        let tokens: Vec<&str> = rows.iter().map(|r| r.token.as_str()).collect();
        // 2.0 first, then the 1.0 tie alphabetically, then 0.25.
        assert_eq!(tokens, vec!["big", "alpha", "zeta", "small"]);
        let ranks: Vec<usize> = rows.iter().map(|r| r.rank).collect();
        assert_eq!(ranks, vec![0, 1, 2, 3]);
    }

    #[test]
    fn frequency_threshold_drops_rare_tokens_per_segment() {
        // Segment a: 4 messages, threshold at fraction 0.5 is 2.
        let mut messages = Vec::new();
        let mut records = Vec::new();
        for i in 0..4 {
            let toks: &[&str] = if i == 0 { &["rare", "common"] } else { &["common"] };
            messages.push(message(&format!("a{i}"), 1, toks));
            let scores: Vec<f64> = toks.iter().map(|_| 1.0).collect();
            records.push(record(&format!("a{i}"), toks, &scores));
        }
        let corpus = TokenizedCorpus::from_messages(messages).expect("corpus");
        let attributions = AttributionSet::from_records(records).expect("set");
        let assignment = single_segment(&corpus);
        let options = AggregationOptions {
            min_freq_fraction: 0.5,
            ..AggregationOptions::default()
        };
        let analysis =
            aggregate_token_importance(&corpus, &attributions, &assignment, &options)
                .expect("aggregate");
        let seg = analysis.segment("all").expect("segment");
        assert_eq!(seg.threshold, 2);
        let tokens: Vec<&str> = seg.class1.rows.iter().map(|r| r.token.as_str()).collect();
        assert_eq!(tokens, vec!["common"]);
    }

    fn two_segment_fixture() -> (TokenizedCorpus, AttributionSet, SegmentAssignment) {
        let corpus = TokenizedCorpus::from_messages(vec![
            message("m1", 1, &["shared", "alpha"]),
            message("m2", 0, &["shared", "beta"]),
            message("m3", 1, &["shared"]),
        ])
        .expect("corpus");
        let attributions = AttributionSet::from_records(vec![
            record("m1", &["shared", "alpha"], &[0.1, 0.7]),
            record("m2", &["shared", "beta"], &[0.2, -0.4]),
            record("m3", &["shared"], &[0.3]),
        ])
        .expect("set");
        let labels: HashMap<String, String> = [
            ("m1".to_string(), "seg_a".to_string()),
            ("m2".to_string(), "seg_a".to_string()),
            ("m3".to_string(), "seg_b".to_string()),
        ]
        .into_iter()
        .collect();
        let assignment = SegmentAssignment::new(
            "test",
            labels,
            vec!["seg_a".to_string(), "seg_b".to_string()],
        )
        .expect("assignment");
        (corpus, attributions, assignment)
    }

    #[test]
    fn full_data_totals_are_the_exact_sum_of_segment_totals() {
        let (corpus, attributions, assignment) = two_segment_fixture();
        let analysis = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect("aggregate");

        let lookup = |seg: &SegmentTables, token: &str| -> Option<(f64, usize)> {
            seg.class1
                .rows
                .iter()
                .chain(&seg.class0.rows)
                .find(|r| r.token == token)
                .map(|r| (r.total_relevance, r.doc_frequency))
        };
        let full = analysis.full_data();
        for token in ["shared", "alpha", "beta"] {
            let mut total = 0.0;
            let mut df = 0;
            for label in ["seg_a", "seg_b"] {
                if let Some((t, d)) = lookup(analysis.segment(label).expect("segment"), token) {
                    total += t;
                    df += d;
                }
            }
            let (full_total, full_df) = lookup(full, token).expect("in full_data");
            assert_eq!(full_total.to_bits(), total.to_bits(), "token {token}");
            assert_eq!(full_df, df, "token {token}");
        }
        assert_eq!(full.size, 3);
        // full_data comes first, then segments in display order.
        let order: Vec<&str> = analysis.segments.iter().map(|s| s.segment.as_str()).collect();
        assert_eq!(order, vec![FULL_DATA_SEGMENT, "seg_a", "seg_b"]);
    }

    #[test]
    fn label_filters_restrict_the_analyzed_messages() {
        let (corpus, attributions, assignment) = two_segment_fixture();
        let options = AggregationOptions {
            filter: MessageFilter::Label1,
            ..AggregationOptions::default()
        };
        let analysis =
            aggregate_token_importance(&corpus, &attributions, &assignment, &options)
                .expect("aggregate");
        // m2 (label 0) is excluded: beta disappears, seg_a shrinks to 1.
        let seg_a = analysis.segment("seg_a").expect("segment");
        assert_eq!(seg_a.size, 1);
        assert!(seg_a.class0.rows.is_empty());
        let full = analysis.full_data();
        assert_eq!(full.size, 2);
        let shared = full
            .class1
            .rows
            .iter()
            .find(|r| r.token == "shared")
            .expect("shared");
        assert_eq!(shared.total_relevance, 0.1 + 0.3);
    }

    #[test]
    fn missing_attribution_for_an_analyzed_message_is_an_error() {
        let (corpus, _, assignment) = two_segment_fixture();
        let partial = AttributionSet::from_records(vec![
            record("m1", &["shared", "alpha"], &[0.1, 0.7]),
            record("m3", &["shared"], &[0.3]),
        ])
        .expect("set");
        let err = aggregate_token_importance(
            &corpus,
            &partial,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect_err("missing m2");
        assert!(err.to_string().contains("m2"), "got: {err}");

        // With a filter that excludes m2, the same set is sufficient.
        let options = AggregationOptions {
            filter: MessageFilter::Label1,
            ..AggregationOptions::default()
        };
        aggregate_token_importance(&corpus, &partial, &assignment, &options)
            .expect("m2 filtered out");
    }

    #[test]
    fn reserved_full_data_label_is_rejected() {
        let corpus =
            TokenizedCorpus::from_messages(vec![message("m1", 1, &["a"])]).expect("corpus");
        let attributions =
            AttributionSet::from_records(vec![record("m1", &["a"], &[1.0])]).expect("set");
        let labels = [("m1".to_string(), FULL_DATA_SEGMENT.to_string())]
            .into_iter()
            .collect();
        let assignment =
            SegmentAssignment::new("test", labels, vec![FULL_DATA_SEGMENT.to_string()])
                .expect("assignment");
        let err = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect_err("reserved");
        assert!(err.to_string().contains("reserved"));
    }

    #[test]
    fn unique_top_tokens_drops_shared_tokens() {
        let table = |segment: &str, tokens: &[&str]| TokenImportanceTable {
            segment: segment.to_string(),
            direction: Direction::Class1,
            rows: tokens
                .iter()
                .enumerate()
                .map(|(i, t)| ImportanceRow {
                    rank: i,
                    token: t.to_string(),
                    total_relevance: 1.0,
                    mean_relevance: 1.0,
                    doc_frequency: 1,
                })
                .collect(),
        };
        let a = table("a", &["x", "y", "w"]);
        let b = table("b", &["y", "z"]);
        let result = unique_top_tokens(&[&a, &b], 2).expect("unique");
        assert_eq!(result.len(), 2);
        assert_eq!(result[0].0, "a");
        let a_tokens: Vec<&str> = result[0].1.iter().map(|r| r.token.as_str()).collect();
        // Only the top 2 of each table participate: w is outside the top-k.
        assert_eq!(a_tokens, vec!["x"]);
        let b_tokens: Vec<&str> = result[1].1.iter().map(|r| r.token.as_str()).collect();
        assert_eq!(b_tokens, vec!["z"]);

        let err = unique_top_tokens(&[&a], 2).expect_err("one table");
        assert!(err.to_string().contains("at least 2"));
    }

    #[test]
    fn csv_export_lists_all_tables() {
        let (corpus, attributions, assignment) = two_segment_fixture();
        let analysis = aggregate_token_importance(
            &corpus,
            &attributions,
            &assignment,
            &AggregationOptions::default(),
        )
        .expect("aggregate");
        let dir = tempfile::tempdir().expect("dir");
        let path = dir.path().join("importance.csv");
        write_importance_csv(&path, &analysis).expect("write");
        let text = std::fs::read_to_string(&path).expect("read");
        let mut lines = text.lines();
        assert_eq!(
            lines.next().expect("header"),
            "segment,direction,rank,token,total_relevance,mean_relevance,doc_frequency"
        );
        assert!(text.contains("full_data,class1,"));
        assert!(text.contains("seg_a,class0,0,beta,"));
    }

    /// Per segment: (label, size, rows of (token, total, doc_frequency)).
    type BruteTables = Vec<(String, usize, Vec<(String, f64, usize)>)>;

    /// Independent recomputation with plain nested loops, following the
    /// documented summation order (corpus order within a segment, display
    /// order for full_data).
    fn brute_force(
        corpus: &TokenizedCorpus,
        attributions: &AttributionSet,
        assignment: &SegmentAssignment,
        options: &AggregationOptions,
    ) -> BruteTables {
        let mut out = Vec::new();
        let mut full: Vec<(String, f64, usize)> = Vec::new();
        let mut full_size = 0usize;
        for segment in assignment.segments() {
            let members: Vec<&TokenizedMessage> = corpus
                .messages()
                .iter()
                .filter(|m| {
                    options.filter.accepts(m.label)
                        && assignment.get(&m.id) == Some(segment.as_str())
                })
                .collect();
            let mut tokens: Vec<String> = members
                .iter()
                .flat_map(|m| m.tokens.iter().cloned())
                .collect();
            tokens.sort();
            tokens.dedup();
            let mut rows = Vec::new();
            for token in &tokens {
                let mut total = 0.0f64;
                let mut df = 0usize;
                for m in &members {
                    let record = attributions.get(&m.id).expect("covered");
                    let mut message_total = 0.0f64;
                    let mut present = false;
                    for (t, &s) in record.tokens.iter().zip(&record.scores) {
                        if t == token {
                            message_total += s;
                            present = true;
                        }
                    }
                    if present {
                        total += message_total;
                        df += 1;
                    }
                }
                rows.push((token.clone(), total, df));
            }
            // Fold into full_data in display order.
            for (token, total, df) in &rows {
                match full.iter_mut().find(|(t, _, _)| t == token) {
                    Some((_, ft, fd)) => {
                        *ft += *total;
                        *fd += *df;
                    }
                    None => full.push((token.clone(), *total, *df)),
                }
            }
            full_size += members.len();
            out.push((segment.clone(), members.len(), rows));
        }
        out.insert(0, (FULL_DATA_SEGMENT.to_string(), full_size, full));
        out
    }

    proptest::proptest! {
        /// The optimized aggregation matches a brute-force recomputation
        /// bit-for-bit, including thresholds and sign splitting.
        #[test]
        fn aggregation_matches_brute_force(
            spec in proptest::collection::vec(
                (0u8..2, proptest::collection::vec((0usize..6, -2.0f64..2.0), 0..8), 0usize..3),
                1..10
            ),
            frac in 0.0f64..0.8
        ) {
            let vocab = ["t0", "t1", "t2", "t3", "t4", "t5"];
            let seg_names = ["s0", "s1", "s2"];
            let mut messages = Vec::new();
            let mut records = Vec::new();
            let mut labels = HashMap::new();
            for (i, (label, toks, seg)) in spec.iter().enumerate() {
                let id = format!("m{i}");
                let tokens: Vec<&str> = toks.iter().map(|(t, _)| vocab[*t]).collect();
                let scores: Vec<f64> = toks.iter().map(|(_, s)| *s).collect();
                messages.push(message(&id, *label, &tokens));
                records.push(record(&id, &tokens, &scores));
                labels.insert(id, seg_names[*seg].to_string());
            }
            let corpus = TokenizedCorpus::from_messages(messages).expect("corpus");
            let attributions = AttributionSet::from_records(records).expect("set");
            let order: Vec<String> = seg_names.iter().map(|s| s.to_string()).collect();
            let assignment = SegmentAssignment::new("test", labels, order).expect("assignment");
            let options = AggregationOptions {
                min_freq_fraction: frac,
                ..AggregationOptions::default()
            };
            let analysis = aggregate_token_importance(&corpus, &attributions, &assignment, &options)
                .expect("aggregate");
            let expected = brute_force(&corpus, &attributions, &assignment, &options);

            proptest::prop_assert_eq!(analysis.segments.len(), expected.len());
            for (got, (want_label, want_size, want_rows)) in
                analysis.segments.iter().zip(&expected)
            {
                proptest::prop_assert_eq!(&got.segment, want_label);
                proptest::prop_assert_eq!(got.size, *want_size);
                let threshold = active_threshold(frac, *want_size);
                proptest::prop_assert_eq!(got.threshold, threshold);
                for (token, total, df) in want_rows {
                    let found = got
                        .class1
                        .rows
                        .iter()
                        .chain(&got.class0.rows)
                        .find(|r| &r.token == token);
                    if *df < threshold || *total == 0.0 {
                        proptest::prop_assert!(found.is_none(),
                            "token {} should be dropped in {}", token, want_label);
                    } else {
                        let row = found.expect("token present");
                        proptest::prop_assert_eq!(row.total_relevance.to_bits(), total.to_bits(),
                            "total for {} in {}", token, want_label);
                        proptest::prop_assert_eq!(row.doc_frequency, *df);
                        let mean = total / *df as f64;
                        proptest::prop_assert_eq!(row.mean_relevance.to_bits(), mean.to_bits());
                        let in_class1 = got.class1.rows.iter().any(|r| &r.token == token);
                        proptest::prop_assert_eq!(in_class1, *total > 0.0);
                    }
                }
                // No extra tokens beyond the brute-force set.
                for row in got.class1.rows.iter().chain(&got.class0.rows) {
                    proptest::prop_assert!(want_rows.iter().any(|(t, _, _)| t == &row.token));
                }
            }
        }

        /// Raising the frequency threshold never adds tokens.
        #[test]
        fn threshold_is_monotone(
            spec in proptest::collection::vec(
                (0u8..2, proptest::collection::vec((0usize..4, -2.0f64..2.0), 0..6)),
                1..12
            ),
            lo in 0.0f64..0.5,
            delta in 0.0f64..0.5
        ) {
            let vocab = ["t0", "t1", "t2", "t3"];
            let mut messages = Vec::new();
            let mut records = Vec::new();
            for (i, (label, toks)) in spec.iter().enumerate() {
                let id = format!("m{i}");
                let tokens: Vec<&str> = toks.iter().map(|(t, _)| vocab[*t]).collect();
                let scores: Vec<f64> = toks.iter().map(|(_, s)| *s).collect();
                messages.push(message(&id, *label, &tokens));
                records.push(record(&id, &tokens, &scores));
            }
            let corpus = TokenizedCorpus::from_messages(messages).expect("corpus");
            let attributions = AttributionSet::from_records(records).expect("set");
            let assignment = single_segment(&corpus);
            let run = |frac: f64| {
                aggregate_token_importance(&corpus, &attributions, &assignment, &AggregationOptions {
                    min_freq_fraction: frac,
                    ..AggregationOptions::default()
                }).expect("aggregate")
            };
            let loose = run(lo);
            let strict = run((lo + delta).min(1.0));
            for (a, b) in loose.segments.iter().zip(&strict.segments) {
                let loose_tokens: std::collections::HashSet<&str> = a
                    .class1.rows.iter().chain(&a.class0.rows)
                    .map(|r| r.token.as_str()).collect();
                for row in b.class1.rows.iter().chain(&b.class0.rows) {
                    proptest::prop_assert!(loose_tokens.contains(row.token.as_str()),
                        "{} appeared only at the stricter threshold", row.token);
                }
            }
        }
    }
}
