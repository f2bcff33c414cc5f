//! Load a corpus and show how raw text becomes analysis tokens.
//!
//! ```text
//! cargo run --example corpus_normalization
//! ```
//!
//! Normalization applies the structured-text pattern rules (URLs, prices,
//! times, and similar become `tag_*` tokens), lowercases, strips punctuation,
//! and removes stopwords. The bundled rules and stopword list are used here;
//! both can be replaced with files.

use std::path::PathBuf;

use seglens::corpus::{load_corpus, RuleSet, Stopwords};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini").join(name)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = load_corpus(&fixture("corpus.jsonl"))?;
    println!("loaded {} messages", corpus.len());

    let rules = RuleSet::bundled();
    let stopwords = Stopwords::bundled();
    let tokenized = corpus.tokenize(&rules, &stopwords);

    // Show a handful of messages, preferring ones where the pattern rules
    // fired so the tag_* replacement is visible.
    let mut shown = 0;
    for message in tokenized.messages() {
        let has_tag = message.tokens.iter().any(|t| t.starts_with("tag_"));
        if shown >= 2 && !has_tag {
            continue;
        }
        let raw = &corpus.get(&message.id).expect("same ids").text;
        println!("\nid      : {}", message.id);
        println!("raw     : {raw}");
        println!("tokens  : {}", message.tokens.join(" "));
        shown += 1;
        if shown >= 4 {
            break;
        }
    }

    let total: usize = tokenized.messages().iter().map(|m| m.tokens.len()).sum();
    println!(
        "\n{} tokens across the corpus, {:.1} per message on average",
        total,
        total as f64 / tokenized.len() as f64
    );
    Ok(())
}
