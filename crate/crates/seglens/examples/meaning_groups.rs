//! Group tokens by how their embedding leans between two anchor vocabularies.
//!
//! ```text
//! cargo run --example meaning_groups
//! ```
//!
//! Each token's cosine similarity to a class-1 anchor list and a class-0
//! anchor list is compared; the signed difference decides the lean and a set
//! of edges turns its magnitude into buckets (1 = no real lean, 4 = strongly
//! aligned). Here the anchors are the top complaint and non-complaint words
//! the classifier itself surfaced, so the grouping shows which ranked tokens
//! *mean* something close to the class cores.

use std::path::PathBuf;

use seglens::aggregation::{aggregate_token_importance, AggregationOptions};
use seglens::attribution::{attribute_corpus, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::embeddings::{load_embeddings, AnchorSet};
use seglens::segmentation::segment_by_metadata;
use seglens::word_grouping::{meaning_annotate, Meaning, DEFAULT_MEANING_EDGES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini");
    let corpus =
        load_corpus(&dir.join("corpus.jsonl"))?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let table = load_embeddings(&dir.join("embeddings.txt"))?;
    let model = train_reference_classifier(&corpus, &TrainParams::default(), 0.5)?;
    let attributions = attribute_corpus(&model, &corpus);
    let by_topic = segment_by_metadata(&corpus, "topic");
    let analysis =
        aggregate_token_importance(&corpus, &attributions, &by_topic, &AggregationOptions::default())?;
    let full = analysis.full_data();

    // Anchor lists: the ten strongest tokens per direction.
    let anchors_class1: Vec<&str> = full.class1.top_k(10).iter().map(|r| r.token.as_str()).collect();
    let anchors_class0: Vec<&str> = full.class0.top_k(10).iter().map(|r| r.token.as_str()).collect();
    println!("class-1 anchors: {}", anchors_class1.join(", "));
    println!("class-0 anchors: {}", anchors_class0.join(", "));

    let a = AnchorSet::new("class1", &anchors_class1).resolve(&table)?;
    let b = AnchorSet::new("class0", &anchors_class0).resolve(&table)?;

    let tokens: Vec<&str> = full
        .class1
        .top_k(12)
        .iter()
        .chain(full.class0.top_k(12))
        .map(|r| r.token.as_str())
        .collect();
    let annotations = meaning_annotate(&tokens, &a, &b, &table, &DEFAULT_MEANING_EDGES)?;

    println!("\ntoken         lean     bucket  difference");
    for ann in &annotations {
        match ann.meaning {
            Meaning::Scored {
                difference,
                bucket,
                lean,
            } => println!(
                "{:12}  {:7}  {bucket}       {difference:+.3}",
                ann.token,
                lean.name()
            ),
            Meaning::NoEmbedding => println!("{:12}  (no embedding)", ann.token),
        }
    }
    Ok(())
}
