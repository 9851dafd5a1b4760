use serde::{Deserialize, Serialize};

use super::{EvalError, Prediction};
use crate::datagen::Example;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub bug_free: usize,
    pub bug_free_predicted_bug_free: usize,
    pub classified_correctly: usize,
    pub buggy: usize,
    pub localized: usize,
    pub localized_and_repaired: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Share of bug-free programs classified bug-free.
    pub true_positive_rate: f64,
    pub classification_accuracy: f64,
    /// Share of buggy programs whose bug position is reported exactly.
    pub localization_accuracy: f64,
    /// Share of buggy programs located exactly and repaired with a mention
    /// of the original variable.
    pub loc_repair_accuracy: f64,
    pub counts: Counts,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(counts: Counts) -> Self {
        Self {
            true_positive_rate: rate(counts.bug_free_predicted_bug_free, counts.bug_free),
            classification_accuracy: rate(counts.classified_correctly, counts.total),
            localization_accuracy: rate(counts.localized, counts.buggy),
            loc_repair_accuracy: rate(counts.localized_and_repaired, counts.buggy),
            counts,
        }
    }
}

/// Aggregates predictions against ground truth, position by position.
pub fn compute_metrics(predictions: &[Prediction], truth: &[Example]) -> Result<Metrics, EvalError> {
    if truth.is_empty() {
        return Err(EvalError::EmptyPartition);
    }
    if predictions.len() != truth.len() {
        return Err(EvalError::Pairing(format!(
            "{} predictions for {} examples",
            predictions.len(),
            truth.len()
        )));
    }
    let mut c = Counts::default();
    for (p, ex) in predictions.iter().zip(truth) {
        c.total += 1;
        if p.is_buggy() == ex.is_buggy {
            c.classified_correctly += 1;
        }
        if !ex.is_buggy {
            c.bug_free += 1;
            if !p.is_buggy() {
                c.bug_free_predicted_bug_free += 1;
            }
            continue;
        }
        c.buggy += 1;
        if p.location().is_some() && p.location() == ex.bug_index {
            c.localized += 1;
            if p.repair() == ex.original_var.as_deref() {
                c.localized_and_repaired += 1;
            }
        }
    }
    Ok(Metrics::from_counts(c))
}
