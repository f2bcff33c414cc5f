//! Aggregate per-token attributions into ranked importance tables.
//!
//! ```text
//! cargo run --example token_importance
//! ```
//!
//! Scores are summed per token within each segment and split by sign: tokens
//! whose accumulated score pushes toward class 1 (here: complaints) land in
//! one table, tokens pushing toward class 0 in the other. A document-frequency
//! threshold drops rare tokens, and rows are ranked by mean relevance.

use std::path::PathBuf;

use seglens::aggregation::{aggregate_token_importance, AggregationOptions, TokenImportanceTable};
use seglens::attribution::{attribute_corpus, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::segmentation::segment_by_metadata;

fn show(table: &TokenImportanceTable, k: usize) {
    println!("\n[{} / toward {}]", table.segment, table.direction.name());
    println!("rank  token         total      mean     docs");
    for row in table.top_k(k) {
        println!(
            "{:>4}  {:12} {:+8.3}  {:+8.4}  {:>4}",
            row.rank, row.token, row.total_relevance, row.mean_relevance, row.doc_frequency
        );
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let model = train_reference_classifier(&corpus, &TrainParams::default(), 0.5)?;
    let attributions = attribute_corpus(&model, &corpus);

    let by_topic = segment_by_metadata(&corpus, "topic");
    let analysis =
        aggregate_token_importance(&corpus, &attributions, &by_topic, &AggregationOptions::default())?;

    let full = analysis.full_data();
    println!(
        "full data: {} messages, frequency threshold {}",
        full.size, full.threshold
    );
    show(&full.class1, 8);
    show(&full.class0, 8);

    let hotel = analysis.segment("Hotel").expect("Hotel segment exists");
    show(&hotel.class1, 8);
    Ok(())
}
