//! Partition a corpus four ways: metadata, length, vocabulary coverage, topics.
//!
//! ```text
//! cargo run --example segment_messages
//! ```
//!
//! Every aggregation downstream works per segment, so this is the step that
//! decides the resolution of the analysis. All four built-in schemes are
//! shown with their segment sizes.

use std::path::PathBuf;

use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::embeddings::load_embeddings;
use seglens::lda::{lda_fit, LdaParams};
use seglens::segmentation::{
    segment_by_length, segment_by_metadata, segment_by_oov, SegmentAssignment,
};

fn sizes(label: &str, assignment: &SegmentAssignment) {
    let parts: Vec<String> = assignment
        .segment_sizes()
        .into_iter()
        .map(|(segment, count)| format!("{segment}={count}"))
        .collect();
    println!("{label:18} {}", parts.join("  "));
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini");
    let corpus =
        load_corpus(&dir.join("corpus.jsonl"))?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let table = load_embeddings(&dir.join("embeddings.txt"))?;

    let by_topic = segment_by_metadata(&corpus, "topic");
    sizes("metadata: topic", &by_topic);

    let by_length = segment_by_length(&corpus, &[20, 50, 80])?;
    sizes("token length", &by_length);

    let by_oov = segment_by_oov(&corpus, &table, &[0.5])?;
    sizes("vocab coverage", &by_oov);

    let lda = lda_fit(
        &corpus,
        &LdaParams {
            topics: 3,
            // Short messages want a sparse document-topic prior.
            alpha: Some(0.5),
            iterations: 300,
            ..LdaParams::default()
        },
    )?;
    let by_lda = lda.hard_assignment();
    sizes("topic model", &by_lda);

    // How well do the unsupervised topics recover the metadata topics?
    let mut table_counts =
        vec![vec![0usize; by_topic.segments().len()]; by_lda.segments().len()];
    for m in corpus.messages() {
        let r = by_lda
            .segments()
            .iter()
            .position(|s| s == by_lda.get(&m.id).unwrap())
            .unwrap();
        let c = by_topic
            .segments()
            .iter()
            .position(|s| s == by_topic.get(&m.id).unwrap())
            .unwrap();
        table_counts[r][c] += 1;
    }
    println!("\ntopic-model clusters vs. metadata topics:");
    println!("{:12} {:>12} {:>8} {:>8}", "", "Restaurant", "Hotel", "Beauty");
    let mut majority = 0usize;
    for (r, row) in table_counts.iter().enumerate() {
        println!(
            "{:12} {:>12} {:>8} {:>8}",
            by_lda.segments()[r], row[0], row[1], row[2]
        );
        majority += row.iter().max().copied().unwrap_or(0);
    }
    println!(
        "purity: {:.3} (fraction of messages in their cluster's majority topic)",
        majority as f64 / corpus.len() as f64
    );
    Ok(())
}
