//! Cross-tabulate classifier errors and pull representative failures.
//!
//! ```text
//! cargo run --example error_analysis
//! ```
//!
//! False positives and false negatives are counted on a grid of one
//! segmentation against another (here: topic rows, length columns), with each
//! cell reporting a class-conditional error rate. The most confidently wrong
//! messages per segment are then listed with their strongest tokens — in the
//! HTML report these are the highlighted examples.

use std::path::PathBuf;

use seglens::attribution::{attribute_corpus, predict_corpus, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::diagnostics::{
    error_rate_table, select_representative_errors, ErrorKind, RateDenominator,
};
use seglens::segmentation::{segment_by_length, segment_by_metadata};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let model = train_reference_classifier(&corpus, &TrainParams::default(), 0.5)?;
    let predictions = predict_corpus(&model, &corpus);
    let attributions = attribute_corpus(&model, &corpus);

    let rows = segment_by_metadata(&corpus, "topic");
    let columns = segment_by_length(&corpus, &[20, 50, 80])?;

    for kind in [ErrorKind::FalsePositive, ErrorKind::FalseNegative] {
        let grid = error_rate_table(
            &corpus,
            &predictions,
            &rows,
            &columns,
            kind,
            RateDenominator::ClassConditional,
        )?;
        println!("\n{} rate grid (topic x message length):", kind.name());
        print!("{:12}", "");
        for c in &grid.columns {
            print!(" {c:>12}");
        }
        println!(" {:>8}", "errors");
        for (r, row_label) in grid.rows.iter().enumerate() {
            print!("{row_label:12}");
            for cell in &grid.cells[r] {
                match cell.rate {
                    Some(rate) => print!(" {:>11.1}%", rate * 100.0),
                    None => print!(" {:>12}", "n/a"),
                }
            }
            println!(" {:>8}", grid.row_error_totals[r]);
        }
    }

    println!("\nmost confident false positives per topic:");
    let reps = select_representative_errors(
        &corpus,
        &predictions,
        &attributions,
        &rows,
        2,
        ErrorKind::FalsePositive,
    )?;
    for (segment, examples) in &reps {
        for ex in examples {
            let mut scored: Vec<(&str, f64)> = ex
                .tokens
                .iter()
                .map(String::as_str)
                .zip(ex.scores.iter().copied())
                .collect();
            scored.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
            let strongest: Vec<String> = scored
                .iter()
                .take(4)
                .map(|(t, s)| format!("{t} ({s:+.2})"))
                .collect();
            println!(
                "  {segment}: {} predicted {} with p={:.3}; strongest tokens: {}",
                ex.id,
                ex.predicted,
                ex.prob,
                strongest.join(", ")
            );
        }
    }
    Ok(())
}
