//! Per-token attribution and the two checks that keep it honest.
//!
//! ```text
//! cargo run --example attribution_oracle
//! ```
//!
//! For the linear reference model, two independent facts must hold exactly
//! (up to float noise):
//!
//! * completeness — the token scores of a message sum to the model's logit
//!   minus its bias;
//! * occlusion equivalence — removing all copies of a token and measuring the
//!   logit drop gives the same score as the analytic weight-times-count form.
//!
//! Both are verified here on a live message.

use std::path::PathBuf;

use seglens::attribution::{
    linear_attribution, occlusion_attribution, train_reference_classifier, TrainParams,
};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let model = train_reference_classifier(&corpus, &TrainParams::default(), 0.5)?;

    let message = &corpus.messages()[0];
    let linear = linear_attribution(&model, &message.id, &message.tokens);
    let occlusion = occlusion_attribution(&model, &message.id, &message.tokens)?;

    println!("message {} ({} tokens):", message.id, message.tokens.len());
    println!("token        linear     occlusion");
    for (i, token) in message.tokens.iter().enumerate() {
        println!(
            "{token:12} {:+.6}  {:+.6}",
            linear.scores[i], occlusion.scores[i]
        );
    }

    let sum: f64 = linear.scores.iter().sum();
    let logit = model.logit(&message.tokens);
    println!("\nsum of scores        = {sum:+.9}");
    println!("logit - bias         = {:+.9}", logit - model.bias());
    println!("completeness gap     = {:+.2e}", sum - (logit - model.bias()));

    let max_gap = linear
        .scores
        .iter()
        .zip(&occlusion.scores)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!("max linear-vs-occlusion gap = {max_gap:.2e}");
    assert!(max_gap < 1e-9, "the two attribution routes must agree");
    println!("both checks hold");
    Ok(())
}
