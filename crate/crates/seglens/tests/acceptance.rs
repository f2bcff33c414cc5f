//! Acceptance suite: one test per release criterion, each ending in a single
//! `criterion N: PASS` line (visible with `--nocapture`; an assertion failure
//! marks the criterion failed).
//!
//! The criteria pin down the toolkit's externally checkable guarantees:
//! frozen reference values for the gender-association statistic on the public
//! 300-dimensional GloVe vectors, F1 and error-grid arithmetic on a fixed set
//! of confusion counts, oracle equivalences for attribution and aggregation,
//! threshold and topic-recovery behavior, and byte-level determinism of the
//! command-line report.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seglens::aggregation::{
    active_threshold, aggregate_token_importance, AggregationOptions, ImportanceRow,
    MessageFilter, RankingStatistic,
};
use seglens::attribution::{
    linear_attribution, occlusion_attribution, AttributionRecord, AttributionSet, LinearModel,
    Prediction, PredictionSet,
};
use seglens::corpus::{TokenizedCorpus, TokenizedMessage};
use seglens::diagnostics::{
    error_rate_table, f1_score, ConfusionMatrix, ErrorKind, RateDenominator,
};
use seglens::embeddings::{load_embeddings, AnchorSet, EmbeddingTable};
use seglens::lda::{lda_fit, LdaParams};
use seglens::segmentation::{segment_by_length, segment_by_metadata, SegmentAssignment};
use seglens::word_grouping::{bias_flag, gender_bias_scan, BiasFlag};

/// Frozen reference rows for the male-versus-female similarity difference on
/// the public glove.6B.300d vectors with the bundled anchor sets:
/// (word, similarity to male anchors, similarity to female anchors,
/// difference), all rounded to three decimals. These are measured benchmark
/// values, not derived constants (0.318 here is not an approximation of
/// 1/pi).
#[allow(clippy::approx_constant)]
const GENDER_REFERENCE_ROWS: [(&str, f64, f64, f64); 14] = [
    ("pink", 0.174, 0.306, -0.132),
    ("ballet", 0.147, 0.259, -0.112),
    ("asian", 0.302, 0.411, -0.109),
    ("hispanic", 0.224, 0.358, -0.134),
    ("nurse", 0.237, 0.450, -0.213),
    ("architect", 0.351, 0.125, 0.226),
    ("cashier", 0.120, 0.247, -0.127),
    ("player", 0.454, 0.318, 0.136),
    ("singer", 0.266, 0.381, -0.115),
    ("diva", 0.165, 0.315, -0.150),
    ("conductor", 0.268, 0.118, 0.150),
    ("composer", 0.306, 0.163, 0.143),
    ("mob", 0.291, 0.183, 0.108),
    ("thief", 0.429, 0.306, 0.123),
];

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

/// Locations tried for the real GloVe file, in order: the SEGLENS_GLOVE
/// environment variable, then conventional names next to the fixtures and at
/// the workspace root.
fn find_glove() -> Option<PathBuf> {
    if let Ok(path) = std::env::var("SEGLENS_GLOVE") {
        let path = PathBuf::from(path);
        if path.is_file() {
            return Some(path);
        }
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    [
        manifest.join("fixtures/glove.6B.300d.txt"),
        manifest.join("fixtures/glove.6B.300d.txt.gz"),
        manifest.join("../../glove.6B.300d.txt"),
        manifest.join("../../glove.6B.300d.txt.gz"),
    ]
    .into_iter()
    .find(|candidate| candidate.is_file())
}

#[test]
fn criterion_1_gender_similarity_reference_values() {
    // Internal consistency of the frozen rows: the difference column must be
    // the male column minus the female column within rounding (each column is
    // rounded to three decimals independently, so the gap can reach 0.001).
    for (word, male, female, diff) in GENDER_REFERENCE_ROWS {
        assert!(
            ((male - female) - diff).abs() <= 0.001 + 1e-12,
            "{word}: {male} - {female} inconsistent with {diff}"
        );
    }

    // Property suite on the bundled mini table; these hold for any table.
    let table = load_embeddings(&fixture_dir().join("embeddings.txt")).expect("mini table");
    let male = AnchorSet::default_male().resolve(&table).expect("male anchors");
    let female = AnchorSet::default_female()
        .resolve(&table)
        .expect("female anchors");
    for word in ["waitress", "barber", "pizza", "service", "great", "awful"] {
        let forward = table.similarity_difference(word, &male, &female).unwrap();
        let backward = table.similarity_difference(word, &female, &male).unwrap();
        assert!(
            (forward + backward).abs() < 1e-12,
            "antisymmetry violated for {word}: {forward} vs {backward}"
        );
        let self_diff = table.similarity_difference(word, &male, &male).unwrap();
        assert!(
            self_diff.abs() < 1e-12,
            "identity violated for {word}: {self_diff}"
        );
        assert!(
            (table.cosine(word, word).unwrap() - 1.0).abs() < 1e-6,
            "self-similarity of {word} is not 1"
        );
    }

    let Some(glove) = find_glove() else {
        println!(
            "criterion 1: SKIP — glove.6B.300d not found (set SEGLENS_GLOVE to its path); \
             frozen-row consistency and the antisymmetry/identity property suite passed"
        );
        return;
    };

    let start = Instant::now();
    let table = load_embeddings(&glove).expect("reference embeddings load");
    let male = AnchorSet::default_male().resolve(&table).expect("male anchors");
    let female = AnchorSet::default_female()
        .resolve(&table)
        .expect("female anchors");
    for (word, _, _, expected) in GENDER_REFERENCE_ROWS {
        let got = table
            .similarity_difference(word, &male, &female)
            .unwrap_or_else(|e| panic!("{word}: {e}"));
        assert!(
            (got - expected).abs() <= 0.002,
            "{word}: difference {got:.4} vs reference {expected:.3}"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 90,
        "load + 14 differences took {elapsed:?}, budget is 90 s"
    );
    println!(
        "criterion 1: PASS — all 14 reference differences within ±0.002 in {elapsed:?}"
    );
}

#[test]
fn criterion_2_f1_from_confusion_counts() {
    // Reference confusion counts for a review-classification benchmark,
    // overall and for its hotel subset.
    let all = ConfusionMatrix::new(3343, 195, 3285, 177);
    let f1_all = f1_score(&all).expect("defined");
    // These cells give F1 = 6686/7058 = 0.94729...; a two-decimal rendering
    // of the same number is 0.95, and a "0.950" presentation of it is a
    // rounding artifact — the test pins the exact arithmetic
    // and does not chase the rounded figure.
    assert!(
        (f1_all - 0.9473).abs() <= 0.0005,
        "overall F1 {f1_all:.6} != 0.9473 ± 0.0005"
    );

    let hotel = ConfusionMatrix::new(975, 45, 939, 41);
    let f1_hotel = f1_score(&hotel).expect("defined");
    assert!(
        (f1_hotel - 0.9578).abs() <= 0.0005,
        "hotel F1 {f1_hotel:.6} != 0.9578 ± 0.0005"
    );
    println!(
        "criterion 2: PASS — F1 overall {f1_all:.4}, hotel {f1_hotel:.4}, both within ±0.0005"
    );
}

/// Build one tokenized message with `len` filler tokens.
fn plain_message(id: String, label: u8, topic: &str, len: usize) -> TokenizedMessage {
    TokenizedMessage {
        id,
        label,
        metadata: std::iter::once(("topic".to_string(), topic.to_string())).collect(),
        tokens: vec!["x".to_string(); len],
    }
}

#[test]
fn criterion_3_error_grid_row_totals() {
    // Reference per-topic confusion cells (tn, fp, fn, tp) for the same
    // benchmark; the cross-tab's per-row error totals must reproduce the
    // off-diagonal cells exactly, independent of the column scheme.
    let cells: [(&str, usize, usize, usize, usize); 3] = [
        ("Restaurant", 1425, 87, 80, 1408),
        ("Hotel", 939, 45, 41, 975),
        ("Beauty", 921, 63, 56, 960),
    ];

    let mut messages = Vec::new();
    let mut predictions = Vec::new();
    let lengths = [5usize, 30, 60, 90];
    let mut serial = 0usize;
    for (topic, tn, fp, fn_count, tp) in cells {
        for (cell_count, label, pred) in [
            (tn, 0u8, 0u8),
            (fp, 0, 1),
            (fn_count, 1, 0),
            (tp, 1, 1),
        ] {
            for _ in 0..cell_count {
                let id = format!("r{serial:05}");
                messages.push(plain_message(
                    id.clone(),
                    label,
                    topic,
                    lengths[serial % lengths.len()],
                ));
                predictions.push(Prediction {
                    id,
                    prob: if pred == 1 { 0.9 } else { 0.1 },
                    pred,
                });
                serial += 1;
            }
        }
    }
    let corpus = TokenizedCorpus::from_messages(messages).expect("corpus builds");
    let predictions = PredictionSet::from_records(predictions).expect("predictions build");
    let rows = segment_by_metadata(&corpus, "topic");
    let columns = segment_by_length(&corpus, &[20, 50, 80]).expect("length segments");

    let fp_grid = error_rate_table(
        &corpus,
        &predictions,
        &rows,
        &columns,
        ErrorKind::FalsePositive,
        RateDenominator::ClassConditional,
    )
    .expect("fp grid");
    let fn_grid = error_rate_table(
        &corpus,
        &predictions,
        &rows,
        &columns,
        ErrorKind::FalseNegative,
        RateDenominator::ClassConditional,
    )
    .expect("fn grid");

    assert_eq!(fp_grid.rows, vec!["Restaurant", "Hotel", "Beauty"]);
    assert_eq!(fp_grid.row_error_totals, vec![87, 45, 63]);
    assert_eq!(fn_grid.row_error_totals, vec![80, 41, 56]);

    // The three row totals called out individually:
    assert_eq!(fp_grid.row_error_totals[0], 87, "restaurant false positives");
    assert_eq!(fn_grid.row_error_totals[1], 41, "hotel false negatives");
    assert_eq!(fn_grid.row_error_totals[2], 56, "beauty false negatives");
    println!(
        "criterion 3: PASS — error-grid row totals reproduce all six off-diagonal cells exactly"
    );
}

#[test]
fn criterion_4_attribution_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vocab: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let messages = 1200usize;
    let mut checked = 0usize;
    for case in 0..messages {
        // Fresh random model for every message, sharing one seeded stream.
        let weights: Vec<f64> = (0..vocab.len()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let bias = rng.gen_range(-0.5..0.5);
        let model = LinearModel::from_parts(vocab.clone(), weights, bias, 0.5).expect("model");

        let len = rng.gen_range(0..=30);
        let tokens: Vec<String> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.05) {
                    "unseen_token".to_string()
                } else {
                    vocab[rng.gen_range(0..vocab.len())].clone()
                }
            })
            .collect();

        let linear = linear_attribution(&model, "m", &tokens);
        let sum: f64 = linear.scores.iter().sum();
        let expected = model.logit(&tokens) - model.bias();
        assert!(
            (sum - expected).abs() < 1e-9,
            "completeness violated on case {case}: {sum} vs {expected}"
        );

        let occlusion = occlusion_attribution(&model, "m", &tokens).expect("finite logit");
        for (i, (a, b)) in linear.scores.iter().zip(&occlusion.scores).enumerate() {
            assert!(
                (a - b).abs() < 1e-9,
                "occlusion mismatch on case {case}, token {i} ({}): {a} vs {b}",
                tokens[i]
            );
        }
        checked += 1;
    }
    assert!(checked >= 1000);
    println!(
        "criterion 4: PASS — completeness and occlusion equivalence hold to 1e-9 on {checked} random messages"
    );
}

/// Per-segment `(token, total, doc_frequency)` triples in first-appearance
/// order.
type SegmentRows = Vec<(String, f64, usize)>;

/// Independent brute-force recomputation of sign-split importance tables.
/// Tokens are totaled in corpus order per segment, split by the sign of the
/// segment total, ranked by |mean| descending with lexicographic ties, and
/// thresholded on within-segment document frequency.
fn brute_force_tables(
    corpus: &TokenizedCorpus,
    attributions: &AttributionSet,
    assignment: &SegmentAssignment,
    threshold: usize,
) -> Vec<(String, Vec<ImportanceRow>, Vec<ImportanceRow>)> {
    // Per segment, in display order, then full-data as a fold over segments
    // in that same order.
    let order: Vec<String> = assignment.segments().to_vec();
    let mut per_segment: HashMap<&str, Vec<&TokenizedMessage>> = HashMap::new();
    for message in corpus.messages() {
        per_segment
            .entry(assignment.get(&message.id).expect("covered"))
            .or_default()
            .push(message);
    }

    // token -> (total, doc_freq) per segment. Duplicate occurrences of a
    // token inside one message are folded into a single per-message
    // contribution first (in occurrence order) and only that subtotal is
    // added to the segment total — float addition is not associative, so
    // exact comparison requires the same grouping.
    let mut segment_accumulators: Vec<(String, SegmentRows)> = Vec::new();
    for segment in &order {
        let mut totals: HashMap<String, (f64, usize)> = HashMap::new();
        let mut first_seen: Vec<String> = Vec::new();
        for message in per_segment.get(segment.as_str()).cloned().unwrap_or_default() {
            let record = attributions.get(&message.id).expect("record");
            let mut message_order: Vec<&str> = Vec::new();
            let mut message_totals: HashMap<&str, f64> = HashMap::new();
            for (token, score) in record.tokens.iter().zip(&record.scores) {
                message_totals
                    .entry(token.as_str())
                    .and_modify(|t| *t += *score)
                    .or_insert_with(|| {
                        message_order.push(token.as_str());
                        *score
                    });
            }
            for token in message_order {
                let entry = totals.entry(token.to_string()).or_insert_with(|| {
                    first_seen.push(token.to_string());
                    (0.0, 0)
                });
                entry.0 += message_totals[token];
                entry.1 += 1;
            }
        }
        let rows: SegmentRows = first_seen
            .iter()
            .map(|t| {
                let (total, freq) = totals[t];
                (t.clone(), total, freq)
            })
            .collect();
        segment_accumulators.push((segment.clone(), rows));
    }

    // Full-data totals: fold per-segment totals in display order, token set
    // ordered by first appearance across that fold.
    let mut full: HashMap<String, (f64, usize)> = HashMap::new();
    let mut full_order: Vec<String> = Vec::new();
    for (_, rows) in &segment_accumulators {
        for (token, total, freq) in rows {
            let entry = full.entry(token.clone()).or_insert_with(|| {
                full_order.push(token.clone());
                (0.0, 0)
            });
            entry.0 += *total;
            entry.1 += *freq;
        }
    }
    let full_rows: SegmentRows = full_order
        .iter()
        .map(|t| {
            let (total, freq) = full[t];
            (t.clone(), total, freq)
        })
        .collect();

    let mut out = Vec::new();
    let mut labeled: Vec<(String, SegmentRows)> =
        vec![("full_data".to_string(), full_rows)];
    labeled.append(&mut segment_accumulators);
    for (segment, rows) in labeled {
        let mut class1: SegmentRows = Vec::new();
        let mut class0: SegmentRows = Vec::new();
        for (token, total, freq) in rows {
            if freq < threshold {
                continue;
            }
            if total > 0.0 {
                class1.push((token, total, freq));
            } else if total < 0.0 {
                class0.push((token, total, freq));
            }
        }
        let rank = |mut rows: SegmentRows| -> Vec<ImportanceRow> {
            rows.sort_by(|a, b| {
                let sa = (a.1 / a.2 as f64).abs();
                let sb = (b.1 / b.2 as f64).abs();
                sb.total_cmp(&sa).then_with(|| a.0.cmp(&b.0))
            });
            rows.into_iter()
                .enumerate()
                .map(|(rank, (token, total, freq))| ImportanceRow {
                    rank,
                    token,
                    total_relevance: total,
                    mean_relevance: total / freq as f64,
                    doc_frequency: freq,
                })
                .collect()
        };
        out.push((segment, rank(class1), rank(class0)));
    }
    out
}

fn rows_equal(label: &str, got: &[ImportanceRow], want: &[ImportanceRow]) {
    assert_eq!(
        got.len(),
        want.len(),
        "{label}: row count {} vs {}",
        got.len(),
        want.len()
    );
    for (g, w) in got.iter().zip(want) {
        assert_eq!(g.rank, w.rank, "{label}: rank for {}", g.token);
        assert_eq!(g.token, w.token, "{label}: token order");
        assert!(
            g.total_relevance == w.total_relevance,
            "{label}: total for {}: {} vs {}",
            g.token,
            g.total_relevance,
            w.total_relevance
        );
        assert!(
            g.mean_relevance == w.mean_relevance,
            "{label}: mean for {}: {} vs {}",
            g.token,
            g.mean_relevance,
            w.mean_relevance
        );
        assert_eq!(g.doc_frequency, w.doc_frequency, "{label}: freq for {}", g.token);
    }
}

#[test]
fn criterion_5_aggregation_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let vocab = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
    let cases = 600usize;
    for case in 0..cases {
        let n_messages = rng.gen_range(1..=10);
        let n_segments = rng.gen_range(1..=3);
        let mut messages = Vec::new();
        let mut records = Vec::new();
        let mut labels: HashMap<String, String> = HashMap::new();
        let mut seg_order: Vec<String> = Vec::new();
        for m in 0..n_messages {
            let id = format!("c{case}m{m}");
            let len = rng.gen_range(0..=8);
            let tokens: Vec<String> = (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect();
            let scores: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let segment = format!("s{}", rng.gen_range(0..n_segments));
            if !seg_order.contains(&segment) {
                seg_order.push(segment.clone());
            }
            labels.insert(id.clone(), segment);
            messages.push(TokenizedMessage {
                id: id.clone(),
                label: u8::from(rng.gen_bool(0.5)),
                metadata: Default::default(),
                tokens: tokens.clone(),
            });
            records.push(AttributionRecord {
                id,
                tokens,
                scores,
                prob: 0.5,
            });
        }
        let corpus = TokenizedCorpus::from_messages(messages).expect("corpus");
        let attributions = AttributionSet::from_records(records).expect("records");
        let assignment =
            SegmentAssignment::new("random", labels, seg_order.clone()).expect("assignment");

        let options = AggregationOptions {
            min_freq_fraction: 0.0,
            ranking: RankingStatistic::MeanRelevance,
            filter: MessageFilter::All,
        };
        let analysis =
            aggregate_token_importance(&corpus, &attributions, &assignment, &options)
                .expect("aggregation");

        let brute = brute_force_tables(&corpus, &attributions, &assignment, 1);
        assert_eq!(analysis.segments.len(), brute.len(), "case {case}: table count");
        for ((segment, want1, want0), tables) in brute.iter().zip(&analysis.segments) {
            assert_eq!(&tables.segment, segment, "case {case}: segment order");
            rows_equal(&format!("case {case} {segment} class1"), &tables.class1.rows, want1);
            rows_equal(&format!("case {case} {segment} class0"), &tables.class0.rows, want0);
        }

        // Cross-segment additivity, exact: the full-data total of every token
        // equals the per-segment totals folded in display order.
        let mut folded: HashMap<&str, f64> = HashMap::new();
        for tables in analysis.segments.iter().skip(1) {
            for row in tables.class1.rows.iter().chain(&tables.class0.rows) {
                *folded.entry(row.token.as_str()).or_insert(0.0) += row.total_relevance;
            }
        }
        let full = analysis.full_data();
        for row in full.class1.rows.iter().chain(&full.class0.rows) {
            let sum = folded.get(row.token.as_str()).copied().unwrap_or(0.0);
            assert!(
                sum == row.total_relevance,
                "case {case}: additivity for {}: {} vs {}",
                row.token,
                sum,
                row.total_relevance
            );
        }
    }
    println!(
        "criterion 5: PASS — {cases} random corpora match the brute-force tables bit-exactly \
         with exact cross-segment additivity"
    );
}

#[test]
fn criterion_6_frequency_threshold() {
    // The default frequency fraction turns segment size into a document
    // frequency floor: 5,000 messages -> 1, 25,000 -> 3.
    assert_eq!(active_threshold(1e-4, 5_000), 1);
    assert_eq!(active_threshold(1e-4, 25_000), 3);

    // Large corpus: a token in 3 documents stays, a token in 2 is dropped.
    let build = |n: usize, planted: &[(&str, usize)]| {
        let mut messages = Vec::new();
        let mut records = Vec::new();
        for i in 0..n {
            let mut tokens = vec![format!("filler{}", i % 7)];
            for (token, count) in planted {
                if i < *count {
                    tokens.push((*token).to_string());
                }
            }
            let scores = vec![1.0; tokens.len()];
            let id = format!("m{i}");
            messages.push(TokenizedMessage {
                id: id.clone(),
                label: 1,
                metadata: Default::default(),
                tokens: tokens.clone(),
            });
            records.push(AttributionRecord {
                id,
                tokens,
                scores,
                prob: 0.5,
            });
        }
        let corpus = TokenizedCorpus::from_messages(messages).unwrap();
        let attributions = AttributionSet::from_records(records).unwrap();
        let labels: HashMap<String, String> = corpus
            .messages()
            .iter()
            .map(|m| (m.id.clone(), "all".to_string()))
            .collect();
        let assignment =
            SegmentAssignment::new("single", labels, vec!["all".to_string()]).unwrap();
        (corpus, attributions, assignment)
    };

    let (corpus, attributions, assignment) =
        build(25_000, &[("kept_at_three", 3), ("dropped_at_two", 2)]);
    let analysis = aggregate_token_importance(
        &corpus,
        &attributions,
        &assignment,
        &AggregationOptions::default(),
    )
    .expect("aggregation");
    let segment = analysis.segment("all").expect("segment");
    assert_eq!(segment.threshold, 3);
    let tokens: Vec<&str> = segment.class1.rows.iter().map(|r| r.token.as_str()).collect();
    assert!(tokens.contains(&"kept_at_three"), "3-document token must stay");
    assert!(
        !tokens.contains(&"dropped_at_two"),
        "2-document token must be dropped"
    );
    assert!(
        tokens.iter().any(|t| t.starts_with("filler")),
        "high-frequency fillers stay"
    );

    // Small corpus: the floor of one keeps even single-document tokens.
    let (corpus, attributions, assignment) = build(5_000, &[("lone_token", 1)]);
    let analysis = aggregate_token_importance(
        &corpus,
        &attributions,
        &assignment,
        &AggregationOptions::default(),
    )
    .expect("aggregation");
    let segment = analysis.segment("all").expect("segment");
    assert_eq!(segment.threshold, 1);
    assert!(
        segment.class1.rows.iter().any(|r| r.token == "lone_token"),
        "single-document token must stay at threshold 1"
    );
    println!(
        "criterion 6: PASS — thresholds 1 at |S|=5000 and 3 at |S|=25000, straddling tokens \
         included and excluded accordingly"
    );
}

#[test]
fn criterion_7_topic_recovery() {
    // 300 documents over three disjoint vocabularies.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut messages = Vec::new();
    let mut truth: Vec<usize> = Vec::new();
    for i in 0..300 {
        let topic = i % 3;
        let len = rng.gen_range(30..=60);
        let tokens: Vec<String> = (0..len)
            .map(|_| format!("t{topic}w{}", rng.gen_range(0..12)))
            .collect();
        messages.push(TokenizedMessage {
            id: format!("d{i:03}"),
            label: 0,
            metadata: Default::default(),
            tokens,
        });
        truth.push(topic);
    }
    let corpus = TokenizedCorpus::from_messages(messages).expect("corpus");

    let start = Instant::now();
    let model = lda_fit(
        &corpus,
        &LdaParams {
            topics: 3,
            alpha: Some(0.5),
            iterations: 400,
            // Count conservation is re-verified after every sweep.
            check_counts_every_sweep: true,
            ..LdaParams::default()
        },
    )
    .expect("sampler runs");
    let elapsed = start.elapsed();
    model.verify_counts().expect("counts conserve");

    let assignment = model.hard_assignment();
    let clusters = assignment.segments().to_vec();
    let mut contingency = vec![vec![0usize; 3]; clusters.len()];
    for (message, topic) in corpus.messages().iter().zip(&truth) {
        let cluster = clusters
            .iter()
            .position(|c| c == assignment.get(&message.id).unwrap())
            .unwrap();
        contingency[cluster][*topic] += 1;
    }
    let majority: usize = contingency.iter().map(|row| row.iter().max().unwrap()).sum();
    let purity = majority as f64 / corpus.len() as f64;
    assert!(purity >= 0.9, "purity {purity:.3} below 0.9");
    assert!(
        elapsed.as_secs() < 30,
        "sampling took {elapsed:?}, budget is 30 s"
    );
    println!(
        "criterion 7: PASS — purity {purity:.3} on disjoint-vocabulary topics in {elapsed:?}, \
         counts conserved every sweep"
    );
}

#[test]
fn criterion_8_gender_scan_flags() {
    // A three-axis table where every similarity difference is planted
    // exactly: male anchors sit on the first axis, female anchors on the
    // second, and each scanned word w = (s + d/2, s - d/2, c) is unit-norm,
    // so its difference is d up to float rounding.
    let mut pairs: Vec<(String, Vec<f32>)> = Vec::new();
    for word in ["man", "men", "he", "his", "sir", "gentleman"] {
        pairs.push((word.to_string(), vec![1.0, 0.0, 0.0]));
    }
    for word in ["woman", "women", "she", "her", "madam", "lady"] {
        pairs.push((word.to_string(), vec![0.0, 1.0, 0.0]));
    }

    let plant = |pairs: &mut Vec<(String, Vec<f32>)>, word: &str, d: f64| {
        let s = 0.35f64;
        let a = s + d / 2.0;
        let b = s - d / 2.0;
        let c = (1.0 - a * a - b * b).sqrt();
        pairs.push((word.to_string(), vec![a as f32, b as f32, c as f32]));
    };

    // The fourteen reference words with their frozen differences.
    let mut scan_list: Vec<String> = Vec::new();
    for (word, _, _, d) in GENDER_REFERENCE_ROWS {
        plant(&mut pairs, word, d);
        scan_list.push(word.to_string());
    }
    // Padding up to a 100-token list, every |difference| at most 0.09375
    // (exactly representable, so no rounding can cross the 0.1 boundary).
    let small = [0.0, 0.03125, -0.0625, 0.09375, -0.09375];
    for i in 0..86 {
        let word = format!("pad{i:02}");
        plant(&mut pairs, &word, small[i % small.len()]);
        scan_list.push(word);
    }
    assert_eq!(scan_list.len(), 100);

    let table = EmbeddingTable::from_pairs(pairs).expect("table builds");
    let male = AnchorSet::default_male().resolve(&table).unwrap();
    let female = AnchorSet::default_female().resolve(&table).unwrap();
    let refs: Vec<&str> = scan_list.iter().map(String::as_str).collect();
    let rows = gender_bias_scan(&refs, &table, &male, &female, 0.1, 0.2).expect("scan");
    assert_eq!(rows.len(), 100);

    let by_token: HashMap<&str, &seglens::word_grouping::BiasRow> =
        rows.iter().map(|r| (r.token.as_str(), r)).collect();

    // Named expectations.
    assert_eq!(by_token["nurse"].flag, BiasFlag::Strong);
    assert!(by_token["nurse"].difference < 0.0, "nurse leans female");
    assert_eq!(by_token["architect"].flag, BiasFlag::Strong);
    assert!(by_token["architect"].difference > 0.0, "architect leans male");
    assert_eq!(by_token["player"].flag, BiasFlag::Significant);
    assert_eq!(by_token["composer"].flag, BiasFlag::Significant);

    // Every planted difference reproduces its frozen value and flag.
    for (word, _, _, d) in GENDER_REFERENCE_ROWS {
        let row = by_token[word];
        assert!(
            (row.difference - d).abs() < 1e-4,
            "{word}: planted {d}, scanned {}",
            row.difference
        );
        assert_eq!(row.flag, bias_flag(d, 0.1, 0.2), "{word}: flag");
    }
    // Zero flags at or below the significance threshold.
    for i in 0..86 {
        let word = format!("pad{i:02}");
        assert_eq!(
            by_token[word.as_str()].flag,
            BiasFlag::None,
            "{word} must stay unflagged"
        );
    }
    println!(
        "criterion 8: PASS — strong and significant flags land exactly as planted, \
         zero flags at |difference| <= 0.1"
    );
}

/// Recursively collect (relative path, bytes) for every file under `root`.
fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .unwrap_or_else(|e| panic!("read_dir {}: {e}", dir.display()))
            .map(|r| r.expect("dir entry"))
            .collect();
        entries.sort_by_key(std::fs::DirEntry::file_name);
        for entry in entries {
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).expect("file reads")));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}

fn run_report(config: &Path, out_dir: &Path) {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_seglens"))
        .args([
            "report",
            "--config",
            config.to_str().expect("utf-8 path"),
            "--set",
            &format!("out_dir={}", out_dir.display()),
        ])
        .status()
        .expect("binary launches");
    assert!(status.success(), "report run failed: {status}");
}

#[test]
fn criterion_9_report_determinism() {
    let config = fixture_dir().join("config.json");
    let scratch = tempfile::tempdir().expect("temp dir");
    let dir_a = scratch.path().join("a");
    let dir_b = scratch.path().join("b");

    let start = Instant::now();
    run_report(&config, &dir_a);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "report took {elapsed:?}, budget is 60 s"
    );

    // All seven sections plus the index must exist and be linked.
    let sections = [
        "performance",
        "importance_meaning",
        "importance_sentiment",
        "importance_pos",
        "unique_tokens",
        "gender_bias",
        "error_analysis",
    ];
    let report_dir = dir_a.join("report");
    let index = std::fs::read_to_string(report_dir.join("index.html")).expect("index exists");
    for section in sections {
        assert!(
            report_dir.join(format!("{section}.html")).is_file(),
            "missing section {section}"
        );
        assert!(index.contains(&format!("{section}.html")), "index links {section}");
    }

    // Re-run into the same directory: every artifact byte survives.
    let before = tree_bytes(&dir_a);
    run_report(&config, &dir_a);
    let after = tree_bytes(&dir_a);
    assert_eq!(
        before.len(),
        after.len(),
        "rerun changed the artifact count"
    );
    for ((path_a, bytes_a), (path_b, bytes_b)) in before.iter().zip(&after) {
        assert_eq!(path_a, path_b, "rerun changed the file set");
        assert_eq!(bytes_a, bytes_b, "rerun changed bytes of {path_a}");
    }

    // A cold run in a fresh directory produces the identical tree.
    run_report(&config, &dir_b);
    let cold = tree_bytes(&dir_b);
    assert_eq!(before.len(), cold.len(), "fresh run changed the artifact count");
    for ((path_a, bytes_a), (path_b, bytes_b)) in before.iter().zip(&cold) {
        assert_eq!(path_a, path_b, "fresh run changed the file set");
        assert_eq!(bytes_a, bytes_b, "fresh run changed bytes of {path_a}");
    }
    println!(
        "criterion 9: PASS — report in {elapsed:?} with all seven sections; warm rerun and \
         cold rerun both byte-identical"
    );
}
