//! Regenerate the committed mini fixture set.
//!
//! ```text
//! cargo run --example generate_fixtures [-- <output-dir>]
//! ```
//!
//! Without an argument this rewrites `fixtures/mini/` inside the crate, which
//! is the checked-in copy that tests and other examples rely on. A library
//! test compares those files against the generator, so any byte drift is
//! caught immediately.

use std::path::PathBuf;

use seglens::synth::{write_mini, MiniSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini"));
    write_mini(&dir, &MiniSpec::default())?;
    println!("wrote corpus.jsonl, embeddings.txt, config.json to {}", dir.display());
    Ok(())
}
