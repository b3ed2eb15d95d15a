//! Detector quality metrics: AUROC, precision at the true error count, and
//! confidence gap.
//!
//! Detectors score low on suspected errors, so AUROC here is the probability
//! that a randomly chosen correct item scores above a randomly chosen
//! erroneous one, with half credit for ties.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric undefined: inputs contain only one class")]
    SingleClass,
    #[error("metric undefined: no errors in the dataset (K = 0)")]
    NoErrors,
    #[error("metric undefined: empty input")]
    Empty,
}

/// AUROC via the rank-sum (Mann-Whitney) formulation with average ranks for
/// ties. Equivalent to counting, over all (correct, error) pairs, 1 when the
/// correct item scores higher and 1/2 on ties.
pub fn auroc(scores: &[f64], is_error: &[bool]) -> Result<f64, MetricError> {
    check_lengths(scores, is_error)?;
    let num_errors = is_error.iter().filter(|e| **e).count();
    let num_correct = scores.len() - num_errors;
    if num_errors == 0 || num_correct == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Average ranks over tie groups (ranks are 1-based).
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let average_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &index in &order[i..=j] {
            ranks[index] = average_rank;
        }
        i = j + 1;
    }

    let correct_rank_sum: f64 = ranks
        .iter()
        .zip(is_error)
        .filter(|(_, is_err)| !**is_err)
        .map(|(rank, _)| rank)
        .sum();
    let n_correct = num_correct as f64;
    let u = correct_rank_sum - n_correct * (n_correct + 1.0) / 2.0;
    Ok(u / (n_correct * num_errors as f64))
}

/// Precision of the K lowest-scored items, where K is the true number of
/// errors. Ties break by stable input index.
pub fn precision_at_num_errors(scores: &[f64], is_error: &[bool]) -> Result<f64, MetricError> {
    check_lengths(scores, is_error)?;
    let k = is_error.iter().filter(|e| **e).count();
    if k == 0 {
        return Err(MetricError::NoErrors);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let flagged_errors = order[..k].iter().filter(|&&i| is_error[i]).count();
    Ok(flagged_errors as f64 / k as f64)
}

/// Mean score of correct items minus mean score of erroneous items.
pub fn confidence_gap(scores: &[f64], is_error: &[bool]) -> Result<f64, MetricError> {
    check_lengths(scores, is_error)?;
    let (mut correct_sum, mut correct_n) = (0.0, 0usize);
    let (mut error_sum, mut error_n) = (0.0, 0usize);
    for (score, is_err) in scores.iter().zip(is_error) {
        if *is_err {
            error_sum += score;
            error_n += 1;
        } else {
            correct_sum += score;
            correct_n += 1;
        }
    }
    if correct_n == 0 || error_n == 0 {
        return Err(MetricError::SingleClass);
    }
    Ok(correct_sum / correct_n as f64 - error_sum / error_n as f64)
}

fn check_lengths(scores: &[f64], is_error: &[bool]) -> Result<(), MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if scores.len() != is_error.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: is_error.len() });
    }
    Ok(())
}

/// A metric slot in an evaluation report: a value, or the reason it is
/// undefined. Undefined metrics stay visibly undefined instead of silently
/// becoming zeros.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricValue {
    Defined(f64),
    Undefined(String),
}

impl MetricValue {
    pub fn from_result(result: Result<f64, MetricError>) -> Self {
        match result {
            Ok(value) => MetricValue::Defined(value),
            Err(e) => MetricValue::Undefined(e.to_string()),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(*v),
            MetricValue::Undefined(_) => None,
        }
    }
}

impl std::fmt::Display for MetricValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricValue::Defined(v) => write!(f, "{v:.4}"),
            MetricValue::Undefined(_) => write!(f, "-"),
        }
    }
}

/// The metric bundle for one detector at one level (document or field).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricBundle {
    pub auroc: MetricValue,
    pub precision_at_num_errors: MetricValue,
    pub confidence_gap: MetricValue,
    pub num_examples: usize,
    pub num_errors: usize,
}

impl MetricBundle {
    pub fn compute(scores: &[f64], is_error: &[bool]) -> Self {
        Self {
            auroc: MetricValue::from_result(auroc(scores, is_error)),
            precision_at_num_errors: MetricValue::from_result(precision_at_num_errors(
                scores, is_error,
            )),
            confidence_gap: MetricValue::from_result(confidence_gap(scores, is_error)),
            num_examples: scores.len(),
            num_errors: is_error.iter().filter(|e| **e).count(),
        }
    }
}

/// Per-detector evaluation: document-level and/or field-level metrics, or
/// the reason the detector produced nothing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorEvaluation {
    pub detector: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub document: Option<MetricBundle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<MetricBundle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unavailable: Option<String>,
}
