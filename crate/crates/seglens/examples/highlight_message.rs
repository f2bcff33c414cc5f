//! Render one message with attribution-scaled token highlighting.
//!
//! ```text
//! cargo run --example highlight_message
//! ```
//!
//! Each token gets a translucent background: blue for scores pushing toward
//! class 1, red for class 0, opacity proportional to the score's share of the
//! message's strongest score. Tokens under ten percent of that maximum stay
//! unhighlighted so the eye goes to what mattered. The emitted HTML is exactly
//! what the report's representative-error sections embed.

use std::path::PathBuf;

use seglens::attribution::{linear_attribution, train_reference_classifier, TrainParams};
use seglens::corpus::{load_corpus, RuleSet, Stopwords};
use seglens::report::{render_highlighted_message, Palette};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/corpus.jsonl");
    let corpus = load_corpus(&path)?.tokenize(&RuleSet::bundled(), &Stopwords::bundled());
    let model = train_reference_classifier(&corpus, &TrainParams::default(), 0.5)?;

    let message = &corpus.messages()[4];
    let record = linear_attribution(&model, &message.id, &message.tokens);

    println!("message {}:", message.id);
    for (token, score) in message.tokens.iter().zip(&record.scores) {
        println!("  {token:14} {score:+.4}");
    }

    let palette = Palette::default();
    let html = render_highlighted_message(&message.tokens, &record.scores, &palette)?;
    println!("\nrendered HTML:\n{html}");
    Ok(())
}
