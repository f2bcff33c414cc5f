//! Fit the collapsed-Gibbs topic model and inspect what it learned.
//!
//! ```text
//! cargo run --example lda_topics
//! ```
//!
//! The sampler is seeded, so repeated runs produce identical topics. Top
//! words per topic make the recovered themes visible; count conservation is
//! checked with the model's own verifier.

use std::path::PathBuf;

use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::lda::{lda_fit, LdaParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());

    let params = LdaParams {
        topics: 3,
        // Short messages want a sparse document-topic prior.
        alpha: Some(0.5),
        iterations: 300,
        ..LdaParams::default()
    };
    let model = lda_fit(&corpus, &params)?;
    model.verify_counts()?;
    println!(
        "fitted {} topics over {} documents (counts conserve)",
        model.topics(),
        corpus.len()
    );

    for topic in 0..model.topics() {
        let words: Vec<String> = model
            .top_words(topic, 8)
            .into_iter()
            .map(|(w, p)| format!("{w} ({p:.3})"))
            .collect();
        println!("topic {topic}: {}", words.join(", "));
    }

    let assignment = model.hard_assignment();
    let parts: Vec<String> = assignment
        .segment_sizes()
        .into_iter()
        .map(|(segment, count)| format!("{segment}={count}"))
        .collect();
    println!("hard assignment: {}", parts.join("  "));
    Ok(())
}
