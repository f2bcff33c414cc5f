//! Explore the embedding table: cosine similarity and anchor-set similarity.
//!
//! ```text
//! cargo run --example embedding_similarity
//! ```
//!
//! The mini embedding table has planted structure: words from the same review
//! topic are close, sentiment separates opinion words, and a gender direction
//! is shared with the default masculine/feminine anchor words.

use std::path::PathBuf;

use seglens::embeddings::{load_embeddings, AnchorSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/embeddings.txt");
    let table = load_embeddings(&path)?;
    println!("{} words, {} dimensions", table.len(), table.dim());

    println!("\npairwise cosine similarity:");
    for (a, b) in [
        ("pizza", "burger"),
        ("pizza", "pillow"),
        ("awful", "terrible"),
        ("awful", "wonderful"),
    ] {
        println!("  {a:10} {b:10} {:+.3}", table.cosine(a, b)?);
    }

    let male = AnchorSet::default_male().resolve(&table)?;
    let female = AnchorSet::default_female().resolve(&table)?;
    println!(
        "\nanchor sets: male = [{}], female = [{}]",
        male.words().join(", "),
        female.words().join(", ")
    );

    println!("\nword        sim(male)  sim(female)  difference");
    for word in ["waitress", "barber", "porter", "stylist", "pizza", "service"] {
        let m = table.anchor_similarity(word, &male)?;
        let f = table.anchor_similarity(word, &female)?;
        println!("{word:10}  {m:+.3}      {f:+.3}       {:+.3}", m - f);
    }
    println!("\npositive difference leans toward the male anchors, negative toward the female ones");
    Ok(())
}
