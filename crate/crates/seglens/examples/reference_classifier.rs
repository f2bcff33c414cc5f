//! Train the built-in logistic-regression reference classifier.
//!
//! ```text
//! cargo run --example reference_classifier
//! ```
//!
//! The toolkit is model-agnostic — attribution scores can come from any
//! classifier — but it ships a small bag-of-words logistic regression so the
//! whole pipeline runs without external dependencies. This example trains it
//! on the mini corpus and reports overall and per-topic performance.

use std::path::PathBuf;

use seglens::attribution::{predict_corpus, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::diagnostics::{confusion_matrix, f1_score, per_segment_confusion};
use seglens::segmentation::segment_by_metadata;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());

    let params = TrainParams::default();
    let model = train_reference_classifier(&corpus, &params, 0.5)?;
    println!(
        "trained on {} messages: vocabulary {}, bias {:+.3}",
        corpus.len(),
        model.vocab().len(),
        model.bias()
    );

    let mut weighted: Vec<(&str, f64)> = model
        .vocab()
        .iter()
        .zip(model.weights())
        .map(|(token, &w)| (token.as_str(), w))
        .collect();
    weighted.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    println!("\nlargest weights (positive pushes toward class 1):");
    for (token, w) in weighted.iter().take(8) {
        println!("  {token:12} {w:+.3}");
    }

    let predictions = predict_corpus(&model, &corpus);
    let overall = confusion_matrix(&corpus, &predictions)?;
    println!(
        "\noverall: tn={} fp={} fn={} tp={}  F1={:.4}",
        overall.true_negatives,
        overall.false_positives,
        overall.false_negatives,
        overall.true_positives,
        f1_score(&overall)?
    );

    let by_topic = segment_by_metadata(&corpus, "topic");
    for (segment, cm) in per_segment_confusion(&corpus, &predictions, &by_topic)? {
        println!(
            "{segment:12} tn={:3} fp={:3} fn={:3} tp={:3}  F1={:.4}",
            cm.true_negatives,
            cm.false_positives,
            cm.false_negatives,
            cm.true_positives,
            f1_score(&cm)?
        );
    }
    Ok(())
}
