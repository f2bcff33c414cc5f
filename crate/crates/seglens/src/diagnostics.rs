//! Classifier error analysis: confusion matrices, F1, cross-tabulated
//! FP/FN rate grids, and selection of representative misclassified examples.
//!
//! Class 1 is the positive class throughout. Hard decisions come from the
//! prediction records themselves, so external model conventions are honored
//! rather than re-derived from probabilities.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::attribution::{AttributionSet, PredictionSet};
use crate::corpus::TokenizedCorpus;
use crate::segmentation::SegmentAssignment;
use crate::{Result, SeglensError};

/// Standard binary-classification cell counts, class 1 positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    /// Actual 1, predicted 1.
    pub true_positives: usize,
    /// Actual 0, predicted 1.
    pub false_positives: usize,
    /// Actual 0, predicted 0.
    pub true_negatives: usize,
    /// Actual 1, predicted 0.
    pub false_negatives: usize,
}

impl ConfusionMatrix {
    /// Build from cell counts in (tp, fp, tn, fn) order.
    #[must_use]
    pub fn new(tp: usize, fp: usize, tn: usize, fn_count: usize) -> Self {
        ConfusionMatrix {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_count,
        }
    }

    /// Record one (actual, predicted) pair.
    pub fn add(&mut self, actual: u8, predicted: u8) {
        match (actual, predicted) {
            (1, 1) => self.true_positives += 1,
            (0, 1) => self.false_positives += 1,
            (0, 0) => self.true_negatives += 1,
            _ => self.false_negatives += 1,
        }
    }

    /// Add another matrix cell-wise.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.true_negatives += other.true_negatives;
        self.false_negatives += other.false_negatives;
    }

    /// Total scored messages.
    #[must_use]
    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }

    /// Messages with actual label 1.
    #[must_use]
    pub fn actual_positives(&self) -> usize {
        self.true_positives + self.false_negatives
    }

    /// Messages with actual label 0.
    #[must_use]
    pub fn actual_negatives(&self) -> usize {
        self.true_negatives + self.false_positives
    }
}

/// Exact harmonic-mean F1 over a confusion matrix.
///
/// Errors when precision or recall is undefined (`tp+fp == 0` or
/// `tp+fn == 0`) so callers report "n/a" instead of a silent zero; returns
/// 0.0 when precision and recall are both defined and zero. The value is
/// never rounded — display layers decide formatting.
pub fn f1_score(cm: &ConfusionMatrix) -> Result<f64> {
    let predicted_positives = cm.true_positives + cm.false_positives;
    let actual_positives = cm.actual_positives();
    if predicted_positives == 0 || actual_positives == 0 {
        return Err(SeglensError::Undefined(format!(
            "undefined F1: predicted positives = {predicted_positives}, \
             actual positives = {actual_positives}"
        )));
    }
    let precision = cm.true_positives as f64 / predicted_positives as f64;
    let recall = cm.true_positives as f64 / actual_positives as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Confusion matrix over a whole corpus. Every message must have a
/// prediction.
pub fn confusion_matrix(
    corpus: &TokenizedCorpus,
    predictions: &PredictionSet,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::default();
    for message in corpus.messages() {
        let prediction = predictions.get(&message.id).ok_or_else(|| {
            SeglensError::DataMismatch(format!("message {:?} has no prediction", message.id))
        })?;
        cm.add(message.label, prediction.pred);
    }
    Ok(cm)
}

/// Per-segment confusion matrices, in segment display order. The assignment
/// must cover the corpus and every message must have a prediction.
pub fn per_segment_confusion(
    corpus: &TokenizedCorpus,
    predictions: &PredictionSet,
    assignment: &SegmentAssignment,
) -> Result<Vec<(String, ConfusionMatrix)>> {
    assignment.validate_against(corpus)?;
    let mut by_segment: HashMap<&str, ConfusionMatrix> = assignment
        .segments()
        .iter()
        .map(|s| (s.as_str(), ConfusionMatrix::default()))
        .collect();
    for message in corpus.messages() {
        let prediction = predictions.get(&message.id).ok_or_else(|| {
            SeglensError::DataMismatch(format!("message {:?} has no prediction", message.id))
        })?;
        let segment = assignment.get(&message.id).expect("validated coverage");
        by_segment
            .get_mut(segment)
            .expect("known segment")
            .add(message.label, prediction.pred);
    }
    Ok(assignment
        .segments()
        .iter()
        .map(|s| (s.clone(), by_segment[s.as_str()]))
        .collect())
}

/// Which error kind a grid tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Actual 0 predicted 1.
    FalsePositive,
    /// Actual 1 predicted 0.
    FalseNegative,
}

impl ErrorKind {
    /// Short stable name (`fp` / `fn`).
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::FalsePositive => "fp",
            ErrorKind::FalseNegative => "fn",
        }
    }

    fn is_error(self, actual: u8, predicted: u8) -> bool {
        match self {
            ErrorKind::FalsePositive => actual == 0 && predicted == 1,
            ErrorKind::FalseNegative => actual == 1 && predicted == 0,
        }
    }

    fn in_denominator(self, actual: u8) -> bool {
        match self {
            ErrorKind::FalsePositive => actual == 0,
            ErrorKind::FalseNegative => actual == 1,
        }
    }
}

/// What divides the error count of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateDenominator {
    /// Actual negatives (FP) or actual positives (FN) in the cell, making
    /// each rate a class-conditional error probability.
    #[default]
    ClassConditional,
    /// All messages in the cell.
    CellSize,
}

/// One cell of an error grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorCell {
    /// Errors of the grid's kind in this cell.
    pub count: usize,
    /// The divisor under the grid's denominator convention.
    pub denominator: usize,
    /// `count / denominator`, or `None` (n/a) when the denominator is zero.
    pub rate: Option<f64>,
}

/// A row-scheme × column-scheme grid of error rates.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorGrid {
    /// Which error this grid counts.
    pub kind: ErrorKind,
    /// The denominator convention used for rates.
    pub denominator: RateDenominator,
    /// Scheme name behind the rows.
    pub row_scheme: String,
    /// Scheme name behind the columns.
    pub column_scheme: String,
    /// Row segment labels, display order.
    pub rows: Vec<String>,
    /// Column segment labels, display order.
    pub columns: Vec<String>,
    /// `cells[row][col]`.
    pub cells: Vec<Vec<ErrorCell>>,
    /// Per-row error totals (the "N of Errors" column).
    pub row_error_totals: Vec<usize>,
    /// Per row: column indices of the lowest and highest defined rate
    /// (first occurrence wins ties); `None` when the row has no defined
    /// rates.
    pub row_extremes: Vec<(Option<usize>, Option<usize>)>,
}

/// Cross-tabulate error rates over two segmentations of the same corpus.
/// Both assignments must cover the corpus; every message needs a prediction.
pub fn error_rate_table(
    corpus: &TokenizedCorpus,
    predictions: &PredictionSet,
    row_assignment: &SegmentAssignment,
    column_assignment: &SegmentAssignment,
    kind: ErrorKind,
    denominator: RateDenominator,
) -> Result<ErrorGrid> {
    row_assignment.validate_against(corpus)?;
    column_assignment.validate_against(corpus)?;
    let rows = row_assignment.segments();
    let columns = column_assignment.segments();
    let row_index: HashMap<&str, usize> =
        rows.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let column_index: HashMap<&str, usize> =
        columns.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut counts = vec![vec![0usize; columns.len()]; rows.len()];
    let mut denominators = vec![vec![0usize; columns.len()]; rows.len()];
    for message in corpus.messages() {
        let prediction = predictions.get(&message.id).ok_or_else(|| {
            SeglensError::DataMismatch(format!("message {:?} has no prediction", message.id))
        })?;
        let r = row_index[row_assignment.get(&message.id).expect("validated coverage")];
        let c = column_index[column_assignment.get(&message.id).expect("validated coverage")];
        if kind.is_error(message.label, prediction.pred) {
            counts[r][c] += 1;
        }
        let in_denom = match denominator {
            RateDenominator::ClassConditional => kind.in_denominator(message.label),
            RateDenominator::CellSize => true,
        };
        if in_denom {
            denominators[r][c] += 1;
        }
    }

    let mut cells = Vec::with_capacity(rows.len());
    let mut row_error_totals = Vec::with_capacity(rows.len());
    let mut row_extremes = Vec::with_capacity(rows.len());
    for r in 0..rows.len() {
        let mut row_cells = Vec::with_capacity(columns.len());
        for c in 0..columns.len() {
            let count = counts[r][c];
            let denom = denominators[r][c];
            row_cells.push(ErrorCell {
                count,
                denominator: denom,
                rate: (denom > 0).then(|| count as f64 / denom as f64),
            });
        }
        row_error_totals.push(row_cells.iter().map(|c| c.count).sum());
        let mut min: Option<usize> = None;
        let mut max: Option<usize> = None;
        for (c, cell) in row_cells.iter().enumerate() {
            if let Some(rate) = cell.rate {
                if min.is_none_or(|m| rate < row_cells[m].rate.expect("defined")) {
                    min = Some(c);
                }
                if max.is_none_or(|m| rate > row_cells[m].rate.expect("defined")) {
                    max = Some(c);
                }
            }
        }
        row_extremes.push((min, max));
        cells.push(row_cells);
    }

    Ok(ErrorGrid {
        kind,
        denominator,
        row_scheme: row_assignment.scheme().to_string(),
        column_scheme: column_assignment.scheme().to_string(),
        rows: rows.to_vec(),
        columns: columns.to_vec(),
        cells,
        row_error_totals,
        row_extremes,
    })
}

/// A misclassified message chosen for display.
#[derive(Debug, Clone, Serialize)]
pub struct RepresentativeExample {
    /// Message id.
    pub id: String,
    /// Actual label.
    pub actual: u8,
    /// Predicted label (always differs from `actual`).
    pub predicted: u8,
    /// Predicted probability of class 1.
    pub prob: f64,
    /// Segment the message belongs to.
    pub segment: String,
    /// The message's tokens.
    pub tokens: Vec<String>,
    /// Per-occurrence attribution scores aligned with `tokens`.
    pub scores: Vec<f64>,
}

/// Per segment, the `n` most confidently wrong errors of a kind, ordered by
/// `|prob - 0.5|` descending with ties broken by id. Segments are returned
/// in display order; a segment without such errors gets an empty list.
pub fn select_representative_errors(
    corpus: &TokenizedCorpus,
    predictions: &PredictionSet,
    attributions: &AttributionSet,
    assignment: &SegmentAssignment,
    n: usize,
    kind: ErrorKind,
) -> Result<Vec<(String, Vec<RepresentativeExample>)>> {
    if n == 0 {
        return Err(SeglensError::InvalidConfig(
            "representative example count must be at least 1".to_string(),
        ));
    }
    assignment.validate_against(corpus)?;
    let mut by_segment: HashMap<&str, Vec<RepresentativeExample>> = HashMap::new();
    for message in corpus.messages() {
        let prediction = predictions.get(&message.id).ok_or_else(|| {
            SeglensError::DataMismatch(format!("message {:?} has no prediction", message.id))
        })?;
        if !kind.is_error(message.label, prediction.pred) {
            continue;
        }
        let record = attributions.get(&message.id).ok_or_else(|| {
            SeglensError::DataMismatch(format!(
                "message {:?} has no attribution record",
                message.id
            ))
        })?;
        let segment = assignment.get(&message.id).expect("validated coverage");
        by_segment.entry(segment).or_default().push(RepresentativeExample {
            id: message.id.clone(),
            actual: message.label,
            predicted: prediction.pred,
            prob: prediction.prob,
            segment: segment.to_string(),
            tokens: record.tokens.clone(),
            scores: record.scores.clone(),
        });
    }
    let mut out = Vec::with_capacity(assignment.segments().len());
    for segment in assignment.segments() {
        let mut examples = by_segment.remove(segment.as_str()).unwrap_or_default();
        examples.sort_by(|a, b| {
            (b.prob - 0.5)
                .abs()
                .partial_cmp(&(a.prob - 0.5).abs())
                .expect("finite probabilities")
                .then_with(|| a.id.cmp(&b.id))
        });
        examples.truncate(n);
        out.push((segment.clone(), examples));
    }
    Ok(out)
}

/// Write per-segment confusion matrices as CSV with columns
/// `segment,true_negatives,false_positives,false_negatives,true_positives,f1`
/// (`f1` is `n/a` when undefined).
pub fn write_confusion_csv(
    path: &Path,
    rows: &[(String, ConfusionMatrix)],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let io_err = |e: csv::Error| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    writer
        .write_record([
            "segment",
            "true_negatives",
            "false_positives",
            "false_negatives",
            "true_positives",
            "f1",
        ])
        .map_err(io_err)?;
    for (segment, cm) in rows {
        let f1 = match f1_score(cm) {
            Ok(v) => v.to_string(),
            Err(_) => "n/a".to_string(),
        };
        writer
            .write_record([
                segment.as_str(),
                &cm.true_negatives.to_string(),
                &cm.false_positives.to_string(),
                &cm.false_negatives.to_string(),
                &cm.true_positives.to_string(),
                &f1,
            ])
            .map_err(io_err)?;
    }
    writer.flush().map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}

/// Write an error grid as CSV: one row per row-segment, rate columns per
/// column-segment (`n/a` for undefined), then the row's error total.
pub fn write_error_grid_csv(path: &Path, grid: &ErrorGrid) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let io_err = |e: csv::Error| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    };
    let mut header = vec!["segment".to_string()];
    header.extend(grid.columns.iter().cloned());
    header.push("n_of_errors".to_string());
    writer.write_record(&header).map_err(io_err)?;
    for (r, row_label) in grid.rows.iter().enumerate() {
        let mut record = vec![row_label.clone()];
        for cell in &grid.cells[r] {
            record.push(match cell.rate {
                Some(rate) => rate.to_string(),
                None => "n/a".to_string(),
            });
        }
        record.push(grid.row_error_totals[r].to_string());
        writer.write_record(&record).map_err(io_err)?;
    }
    writer.flush().map_err(|source| SeglensError::WriteOutput {
        path: path.display().to_string(),
        source,
    })
}
