//! Annotate ranked tokens with sentiment polarity and part-of-speech groups.
//!
//! ```text
//! cargo run --example sentiment_pos_annotation
//! ```
//!
//! Importance tables become easier to read when each token carries a word
//! group: opinion polarity from a binary sentiment lexicon, and one of five
//! part-of-speech families from a token-to-tag lexicon. Unmatched tokens stay
//! unannotated on purpose — in the rendered report they are the uncolored
//! cells.

use std::path::PathBuf;

use seglens::aggregation::{aggregate_token_importance, AggregationOptions};
use seglens::attribution::{attribute_corpus, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::segmentation::segment_by_metadata;
use seglens::word_grouping::{PosLexicon, SentimentLexicon};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let model = train_reference_classifier(&corpus, &TrainParams::default(), 0.5)?;
    let attributions = attribute_corpus(&model, &corpus);
    let by_topic = segment_by_metadata(&corpus, "topic");
    let analysis =
        aggregate_token_importance(&corpus, &attributions, &by_topic, &AggregationOptions::default())?;

    let sentiment = SentimentLexicon::bundled();
    let (pos_count, neg_count) = sentiment.sizes();
    let pos = PosLexicon::bundled();
    println!(
        "sentiment lexicon: {pos_count} positive / {neg_count} negative words; part-of-speech lexicon: {} entries",
        pos.len()
    );

    let full = analysis.full_data();
    for table in [&full.class1, &full.class0] {
        println!("\ntop tokens toward {}:", table.direction.name());
        println!("rank  token         sentiment  part of speech");
        for row in table.top_k(10) {
            let polarity = sentiment.tag(&row.token).name();
            let group = pos.group(&row.token).map_or("-", |g| g.name());
            println!("{:>4}  {:12} {:9}  {}", row.rank, row.token, polarity, group);
        }
    }
    Ok(())
}
