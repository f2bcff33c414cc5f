//! # seglens
//!
//! Model-agnostic diagnostics for binary text classifiers.
//!
//! Given a labeled corpus, per-token attribution scores (from any model, or
//! from the built-in logistic-regression reference classifier), and a word
//! embedding table, seglens explains *where* a classifier's decisions come
//! from and *where* it fails:
//!
//! * messages are partitioned into segments four ways — metadata field,
//!   token-count buckets, out-of-vocabulary fraction, and unsupervised
//!   topics ([`lda`]);
//! * attribution scores are aggregated into per-segment ranked token tables,
//!   sign-split by the class they push toward ([`aggregation`]);
//! * ranked tokens are grouped by meaning, sentiment, part of speech, and
//!   gender association in embedding space ([`word_grouping`]);
//! * classifier errors are cross-tabulated over two segmentations and
//!   representative failures selected ([`diagnostics`]);
//! * everything is rendered into a static multi-page HTML report with
//!   attribution-highlighted example messages ([`report`]).
//!
//! The [`pipeline`] module chains all stages behind one JSON configuration
//! ([`config`]), with content-fingerprint caching for the expensive stages;
//! the `seglens` binary ([`cli`]) exposes each stage as a subcommand.
//!
//! ## Runnable examples
//!
//! Each major capability has a self-contained program under `examples/`,
//! running against the committed mini fixtures in `fixtures/mini/`:
//!
//! | example | shows |
//! |---|---|
//! | `corpus_normalization` | raw text to analysis tokens, pattern rules |
//! | `embedding_similarity` | cosine and anchor-set similarity |
//! | `reference_classifier` | training, per-segment confusion and F1 |
//! | `attribution_oracle` | completeness and occlusion equivalence checks |
//! | `segment_messages` | all four segmentation schemes side by side |
//! | `lda_topics` | seeded topic model, top words, count conservation |
//! | `token_importance` | sign-split ranked importance tables |
//! | `sentiment_pos_annotation` | sentiment and part-of-speech groups |
//! | `meaning_groups` | anchor-similarity meaning buckets |
//! | `gender_bias` | gender-association scan with flag thresholds |
//! | `error_analysis` | error-rate grids and representative failures |
//! | `highlight_message` | one message rendered with score-scaled spans |
//! | `full_report` | the whole pipeline emitting the HTML report |
//! | `generate_fixtures` | regenerates the committed fixture files |
//!
//! Run one with `cargo run --example <name>`.

pub mod aggregation;
pub mod attribution;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod embeddings;
pub mod error;
pub mod lda;
pub mod pipeline;
pub mod report;
pub mod segmentation;
pub mod synth;
pub mod word_grouping;

pub use error::SeglensError;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, SeglensError>;
