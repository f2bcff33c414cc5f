//! Partitioning a corpus into named segments.
//!
//! A segment assignment maps every message id to exactly one segment label
//! under a named scheme. Built-in schemes: a metadata field (missing values
//! become `unknown`), token-count buckets, and out-of-vocabulary fraction
//! buckets. Topic-model assignments are produced by [`crate::lda`].

use std::collections::HashMap;
use std::path::Path;

use crate::corpus::TokenizedCorpus;
use crate::embeddings::EmbeddingTable;
use crate::{Result, SeglensError};

/// A complete assignment of message ids to segment labels.
#[derive(Debug, Clone)]
pub struct SegmentAssignment {
    scheme: String,
    labels: HashMap<String, String>,
    order: Vec<String>,
}

impl SegmentAssignment {
    /// Build an assignment from parts. `order` lists every distinct segment
    /// label once, in display order; `labels` must only use labels from
    /// `order`.
    pub fn new(
        scheme: &str,
        labels: HashMap<String, String>,
        order: Vec<String>,
    ) -> Result<SegmentAssignment> {
        let mut seen = std::collections::HashSet::new();
        for label in &order {
            if !seen.insert(label.clone()) {
                return Err(SeglensError::InvalidConfig(format!(
                    "segment label {label:?} repeated in scheme {scheme:?}"
                )));
            }
        }
        for (id, label) in &labels {
            if !seen.contains(label) {
                return Err(SeglensError::InvalidConfig(format!(
                    "message {id:?} assigned to unlisted segment {label:?}"
                )));
            }
        }
        Ok(SegmentAssignment {
            scheme: scheme.to_string(),
            labels,
            order,
        })
    }

    /// Scheme name (for example `metadata:topic` or `length`).
    #[must_use]
    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    /// Segment labels in display order. May include empty segments (for
    /// example an unoccupied length bucket).
    #[must_use]
    pub fn segments(&self) -> &[String] {
        &self.order
    }

    /// The segment label for a message id.
    #[must_use]
    pub fn get(&self, id: &str) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    /// Number of assigned messages.
    #[must_use]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// True when no message is assigned.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Messages per segment, in segment display order.
    #[must_use]
    pub fn segment_sizes(&self) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for label in self.labels.values() {
            *counts.entry(label.as_str()).or_insert(0) += 1;
        }
        self.order
            .iter()
            .map(|label| (label.clone(), counts.get(label.as_str()).copied().unwrap_or(0)))
            .collect()
    }

    /// Check that the assignment covers a corpus exactly: every message id
    /// has a label and no extra ids are present.
    pub fn validate_against(&self, corpus: &TokenizedCorpus) -> Result<()> {
        for message in corpus.messages() {
            if !self.labels.contains_key(&message.id) {
                return Err(SeglensError::DataMismatch(format!(
                    "scheme {:?}: message {:?} has no segment",
                    self.scheme, message.id
                )));
            }
        }
        if self.labels.len() != corpus.len() {
            let extra = self
                .labels
                .keys()
                .find(|id| !corpus.contains(id))
                .cloned()
                .unwrap_or_default();
            return Err(SeglensError::DataMismatch(format!(
                "scheme {:?}: assignment covers {} ids but the corpus has {} (e.g. extra id {:?})",
                self.scheme,
                self.labels.len(),
                corpus.len(),
                extra
            )));
        }
        Ok(())
    }

    /// Write the assignment as a two-column `id,segment` CSV, in corpus
    /// order.
    pub fn write_csv(&self, path: &Path, corpus: &TokenizedCorpus) -> Result<()> {
        self.validate_against(corpus)?;
        let mut writer = csv::Writer::from_path(path).map_err(|e| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;
        let io_err = |e: csv::Error| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        };
        writer.write_record(["id", "segment"]).map_err(io_err)?;
        for message in corpus.messages() {
            writer
                .write_record([message.id.as_str(), &self.labels[&message.id]])
                .map_err(io_err)?;
        }
        writer.flush().map_err(|source| SeglensError::WriteOutput {
            path: path.display().to_string(),
            source,
        })
    }

    /// Read an `id,segment` CSV written by [`Self::write_csv`] and validate
    /// it against the corpus. Segment display order is first appearance.
    pub fn read_csv(path: &Path, scheme: &str, corpus: &TokenizedCorpus) -> Result<SegmentAssignment> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| SeglensError::ReadInput {
                path: path.display().to_string(),
                source: std::io::Error::other(e),
            })?;
        let mut labels = HashMap::new();
        let mut order = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| SeglensError::InvalidInput {
                path: path.display().to_string(),
                line: i + 2,
                message: format!("malformed CSV row: {e}"),
            })?;
            if row.len() != 2 {
                return Err(SeglensError::InvalidInput {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("expected 2 columns, found {}", row.len()),
                });
            }
            let (id, label) = (row[0].to_string(), row[1].to_string());
            if !order.contains(&label) {
                order.push(label.clone());
            }
            if labels.insert(id.clone(), label).is_some() {
                return Err(SeglensError::InvalidInput {
                    path: path.display().to_string(),
                    line: i + 2,
                    message: format!("duplicate id {id:?}"),
                });
            }
        }
        let assignment = SegmentAssignment::new(scheme, labels, order)?;
        assignment.validate_against(corpus)?;
        Ok(assignment)
    }
}

/// Segment by a metadata field. Messages without the field (or with an empty
/// value) go to `unknown`. Display order is first appearance.
#[must_use]
pub fn segment_by_metadata(corpus: &TokenizedCorpus, field: &str) -> SegmentAssignment {
    let mut labels = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for message in corpus.messages() {
        let label = match message.metadata.get(field) {
            Some(value) if !value.is_empty() => value.clone(),
            _ => "unknown".to_string(),
        };
        if !order.contains(&label) {
            order.push(label.clone());
        }
        labels.insert(message.id.clone(), label);
    }
    SegmentAssignment::new(&format!("metadata:{field}"), labels, order)
        .expect("labels drawn from order")
}

/// Bucket labels for a strictly ascending list of length boundaries.
/// `[20, 50, 80]` yields `len<20`, `20<=len<50`, `50<=len<80`, `80<=len`.
/// An empty boundary list yields the single bucket `all`.
pub fn length_bucket_labels(boundaries: &[usize]) -> Result<Vec<String>> {
    validate_ascending(boundaries, "length boundaries")?;
    if boundaries.is_empty() {
        return Ok(vec!["all".to_string()]);
    }
    let mut labels = Vec::with_capacity(boundaries.len() + 1);
    labels.push(format!("len<{}", boundaries[0]));
    for pair in boundaries.windows(2) {
        labels.push(format!("{}<=len<{}", pair[0], pair[1]));
    }
    labels.push(format!("{}<=len", boundaries[boundaries.len() - 1]));
    Ok(labels)
}

fn validate_ascending<T: PartialOrd + std::fmt::Debug>(values: &[T], what: &str) -> Result<()> {
    for pair in values.windows(2) {
        if pair[1] <= pair[0] {
            return Err(SeglensError::InvalidConfig(format!(
                "{what} must be strictly ascending, got {values:?}"
            )));
        }
    }
    Ok(())
}

fn bucket_index<T: PartialOrd>(value: &T, boundaries: &[T]) -> usize {
    boundaries
        .iter()
        .position(|b| value < b)
        .unwrap_or(boundaries.len())
}

/// Segment by normalized token count. Buckets are lower-inclusive: a message
/// whose length equals a boundary falls in the bucket above it. All buckets
/// appear in display order even when empty.
pub fn segment_by_length(corpus: &TokenizedCorpus, boundaries: &[usize]) -> Result<SegmentAssignment> {
    let bucket_labels = length_bucket_labels(boundaries)?;
    let mut labels = HashMap::new();
    for message in corpus.messages() {
        let bucket = bucket_index(&message.tokens.len(), boundaries);
        labels.insert(message.id.clone(), bucket_labels[bucket].clone());
    }
    SegmentAssignment::new("length", labels, bucket_labels)
}

/// Fraction of token occurrences absent from the embedding table. Repeated
/// occurrences count separately. A zero-token message has fraction 0.
#[must_use]
pub fn oov_fraction(tokens: &[String], table: &EmbeddingTable) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let missing = tokens.iter().filter(|t| !table.contains(t)).count();
    missing as f64 / tokens.len() as f64
}

/// Bucket labels for out-of-vocabulary boundaries. The default single
/// boundary `[0.5]` yields the two-way split `Non OOV` / `OOV`; other
/// boundary lists yield range labels such as `oov<0.25`.
pub fn oov_bucket_labels(boundaries: &[f64]) -> Result<Vec<String>> {
    for &b in boundaries {
        if !(0.0..=1.0).contains(&b) || !b.is_finite() {
            return Err(SeglensError::InvalidConfig(format!(
                "out-of-vocabulary boundary {b} is outside [0, 1]"
            )));
        }
    }
    validate_ascending(boundaries, "out-of-vocabulary boundaries")?;
    if boundaries.is_empty() {
        return Ok(vec!["all".to_string()]);
    }
    if boundaries.len() == 1 {
        return Ok(vec!["Non OOV".to_string(), "OOV".to_string()]);
    }
    let mut labels = Vec::with_capacity(boundaries.len() + 1);
    labels.push(format!("oov<{}", boundaries[0]));
    for pair in boundaries.windows(2) {
        labels.push(format!("{}<=oov<{}", pair[0], pair[1]));
    }
    labels.push(format!("{}<=oov", boundaries[boundaries.len() - 1]));
    Ok(labels)
}

/// Segment by out-of-vocabulary fraction against an embedding table. With
/// the default boundary `[0.5]`, a message whose fraction reaches 0.5 is
/// `OOV`, otherwise `Non OOV`.
pub fn segment_by_oov(
    corpus: &TokenizedCorpus,
    table: &EmbeddingTable,
    boundaries: &[f64],
) -> Result<SegmentAssignment> {
    let bucket_labels = oov_bucket_labels(boundaries)?;
    let mut labels = HashMap::new();
    for message in corpus.messages() {
        let fraction = oov_fraction(&message.tokens, table);
        let bucket = bucket_index(&fraction, boundaries);
        labels.insert(message.id.clone(), bucket_labels[bucket].clone());
    }
    SegmentAssignment::new("oov", labels, bucket_labels)
}
