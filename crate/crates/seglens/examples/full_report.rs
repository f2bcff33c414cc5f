//! Run the whole pipeline through the library API and emit the HTML report.
//!
//! ```text
//! cargo run --example full_report [-- <out-dir>]
//! ```
//!
//! This is what `seglens report --config fixtures/mini/config.json` does,
//! driven as a library: load the configuration, construct the pipeline, run
//! every stage. The output directory ends up with segment assignments,
//! importance tables, bias and error artifacts, and a `report/` subdirectory
//! whose `index.html` links all seven sections. Stage outputs are cached by
//! input fingerprint, so an unchanged rerun is cheap and byte-identical.

use std::path::PathBuf;

use seglens::config::RunConfig;
use seglens::pipeline::{Pipeline, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "mini_report_out".to_string());
    let config_path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini/config.json");

    let overrides = vec![format!("out_dir={out_dir}")];
    let config = RunConfig::load(&config_path, &overrides)?;

    let mut pipeline = Pipeline::new(config, None)?;
    pipeline.run(Stage::Report)?;

    println!("report written under {out_dir}/report — open index.html in a browser");
    for section in [
        "performance",
        "importance_meaning",
        "importance_sentiment",
        "importance_pos",
        "unique_tokens",
        "gender_bias",
        "error_analysis",
    ] {
        let path = PathBuf::from(&out_dir).join("report").join(format!("{section}.html"));
        println!(
            "  {section:22} {}",
            if path.is_file() { "written" } else { "MISSING" }
        );
    }
    Ok(())
}
