//! Command-line driver: parse arguments, run the requested pipeline stage,
//! and map errors to exit codes.
//!
//! Exit codes: 0 on success, 1 for configuration or input problems, 2 for
//! runtime failures (for example an unwritable output directory). On error,
//! one machine-readable JSON line is printed to stderr:
//! `{"error": "<kind>", "message": "<text>"}`.
//!
//! The `SEGLENS_LOG` environment variable controls log verbosity (standard
//! `env_logger` syntax, e.g. `SEGLENS_LOG=info`).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::pipeline::{validate_run, Pipeline, Stage};
use crate::Result;

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Override one config key, e.g. `--set aggregation.top_k=50`. May be
    /// repeated; values parse as JSON, bare words as strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Cap worker threads (default: one per logical CPU).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Stamp generated pages with the current time. Off by default so that
    /// reruns are byte-identical.
    #[arg(long)]
    pub stamp: bool,
}

/// Pipeline stage subcommands; each runs its prerequisites first.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the config and every referenced input; writes nothing.
    Validate(CommonArgs),
    /// Train the built-in reference classifier.
    TrainRef(CommonArgs),
    /// Produce per-token attributions and predictions.
    Attribute(CommonArgs),
    /// Compute all segmentation schemes.
    Segment(CommonArgs),
    /// Aggregate token importance tables per scheme.
    Aggregate(CommonArgs),
    /// Annotate top tokens by meaning, sentiment, and part of speech.
    Annotate(CommonArgs),
    /// Scan top tokens for anchor-similarity bias.
    Bias(CommonArgs),
    /// Confusion matrices, error grids, and representative examples.
    Errors(CommonArgs),
    /// Run everything and render the report bundle.
    Report(CommonArgs),
}

/// Top-level argument structure.
#[derive(Debug, Parser)]
#[command(
    name = "seglens",
    version,
    about = "Segment-level diagnostics for binary text classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

impl Command {
    fn split(&self) -> (Stage, &CommonArgs) {
        match self {
            Command::Validate(a) => (Stage::Validate, a),
            Command::TrainRef(a) => (Stage::TrainRef, a),
            Command::Attribute(a) => (Stage::Attribute, a),
            Command::Segment(a) => (Stage::Segment, a),
            Command::Aggregate(a) => (Stage::Aggregate, a),
            Command::Annotate(a) => (Stage::Annotate, a),
            Command::Bias(a) => (Stage::Bias, a),
            Command::Errors(a) => (Stage::Errors, a),
            Command::Report(a) => (Stage::Report, a),
        }
    }
}

fn current_stamp() -> String {
    let seconds = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("generated at unix time {seconds}")
}

fn execute(command: &Command) -> Result<()> {
    let (stage, args) = command.split();
    if let Some(threads) = args.threads {
        // A global pool can only be installed once per process; a second
        // attempt (as in in-process tests) keeps the existing pool.
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let config = RunConfig::load(&args.config, &args.set)?;
    if stage == Stage::Validate {
        validate_run(&config)?;
        println!("ok: configuration and all inputs are valid");
        return Ok(());
    }
    let stamp = args.stamp.then(current_stamp);
    let mut pipeline = Pipeline::new(config, stamp)?;
    pipeline.run(stage)
}

/// Run the CLI on explicit arguments; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own help/usage text and distinguishes
            // display-only exits (--help, --version) from parse errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let line = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

/// Entry point for the binary: parse `std::env::args`, honoring
/// `SEGLENS_LOG` for logging.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SEGLENS_LOG")).init();
    run(std::env::args())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommands_parse_with_their_flags() {
        let cli = Cli::try_parse_from([
            "seglens",
            "report",
            "--config",
            "run.json",
            "--set",
            "aggregation.top_k=5",
            "--set",
            "seed=11",
            "--threads",
            "2",
            "--stamp",
        ])
        .expect("parse");
        let (stage, args) = cli.command.split();
        assert_eq!(stage, Stage::Report);
        assert_eq!(args.set.len(), 2);
        assert_eq!(args.threads, Some(2));
        assert!(args.stamp);
    }

    #[test]
    fn stage_order_matches_the_pipeline_chain() {
        assert!(Stage::Validate < Stage::TrainRef);
        assert!(Stage::TrainRef < Stage::Attribute);
        assert!(Stage::Attribute < Stage::Segment);
        assert!(Stage::Segment < Stage::Aggregate);
        assert!(Stage::Aggregate < Stage::Annotate);
        assert!(Stage::Annotate < Stage::Bias);
        assert!(Stage::Bias < Stage::Errors);
        assert!(Stage::Errors < Stage::Report);
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert!(Cli::try_parse_from(["seglens", "frobnicate"]).is_err());
    }
}
