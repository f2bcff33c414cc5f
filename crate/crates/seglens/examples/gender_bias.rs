//! Scan the classifier's influential tokens for gender associations.
//!
//! ```text
//! cargo run --example gender_bias
//! ```
//!
//! Every token that pushes predictions toward class 1 is compared against the
//! default masculine and feminine anchor words in embedding space. A
//! similarity difference beyond 0.1 is flagged significant, beyond 0.2
//! strong. On the mini fixtures several staff-role words carry planted
//! associations, so the scan has something to find.

use std::path::PathBuf;

use seglens::aggregation::{aggregate_token_importance, AggregationOptions};
use seglens::attribution::{attribute_corpus, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::embeddings::{load_embeddings, AnchorSet};
use seglens::segmentation::segment_by_metadata;
use seglens::word_grouping::{gender_bias_scan, BiasFlag, DEFAULT_SIGNIFICANT, DEFAULT_STRONG};

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

    let male = AnchorSet::default_male().resolve(&table)?;
    let female = AnchorSet::default_female().resolve(&table)?;

    let tokens: Vec<&str> = analysis
        .full_data()
        .class1
        .top_k(40)
        .iter()
        .map(|r| r.token.as_str())
        .collect();
    println!("scanning the top {} class-1 tokens", tokens.len());

    let rows = gender_bias_scan(
        &tokens,
        &table,
        &male,
        &female,
        DEFAULT_SIGNIFICANT,
        DEFAULT_STRONG,
    )?;

    println!("\nrank  token         sim(male)  sim(female)  difference  flag");
    for row in &rows {
        if row.flag == BiasFlag::None {
            continue;
        }
        println!(
            "{:>4}  {:12} {:+.3}     {:+.3}       {:+.3}      {}",
            row.rank,
            row.token,
            row.sim_a,
            row.sim_b,
            row.difference,
            row.flag.name()
        );
    }
    let flagged = rows.iter().filter(|r| r.flag != BiasFlag::None).count();
    println!(
        "\n{flagged} of {} embedded tokens flagged; the rest stay below the 0.1 threshold",
        rows.len()
    );
    Ok(())
}
