//! Inference rules and accuracy metrics for the joint model and the
//! enumerative repair-only baseline, plus the slot-placement noise
//! experiment.

mod enumerative;
mod metrics;
mod noise;
mod report;

pub use enumerative::{
    decide_enumerative, decide_threshold_only, predict_enumerative, slot_predictions,
    CallCounter, RepairModel, RepairOnly, SlotPrediction,
};
pub use metrics::{compute_metrics, Counts, Metrics};
pub use noise::{run_noise_experiment, NoiseRow};
pub use report::{metrics_csv, metrics_table, noise_csv, noise_table};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{DatagenError, Example};
use crate::model::{predict_pointers, ModelConfig, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("partition is empty")]
    EmptyPartition,
    #[error("clean and noisy sets are not paired: {0}")]
    Pairing(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    BugFree,
    Buggy {
        loc_index: usize,
        repair_name: String,
        loc_prob: f64,
        rep_prob: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub verdict: Verdict,
}

impl Prediction {
    pub fn bug_free() -> Self {
        Self {
            verdict: Verdict::BugFree,
        }
    }

    pub fn is_buggy(&self) -> bool {
        matches!(self.verdict, Verdict::Buggy { .. })
    }

    pub fn location(&self) -> Option<usize> {
        match self.verdict {
            Verdict::Buggy { loc_index, .. } => Some(loc_index),
            Verdict::BugFree => None,
        }
    }

    pub fn repair(&self) -> Option<&str> {
        match &self.verdict {
            Verdict::Buggy { repair_name, .. } => Some(repair_name),
            Verdict::BugFree => None,
        }
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    argmax_where(xs, |_| true)
}

/// Like [`argmax`] but only over indices accepted by `keep`.
pub fn argmax_where(xs: &[f64], keep: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if keep(i) && best.is_none_or(|b| x > xs[b]) {
            best = Some(i);
        }
    }
    best
}

/// Argmax of the repair distribution over the masked positions, falling
/// back to all positions when nothing is masked.
pub(crate) fn top_repair(rep_dist: &[f64], mask: &[u8]) -> usize {
    argmax_where(rep_dist, |i| mask.get(i) == Some(&1))
        .or_else(|| argmax(rep_dist))
        .unwrap_or(0)
}

/// Classification by pointing: position 0 means bug-free. With
/// `confidence`, a non-zero location is reported only when its
/// probability reaches the threshold.
pub fn predict_joint_with(
    params: &ModelParams,
    cfg: &ModelConfig,
    ex: &Example,
    confidence: Option<f64>,
) -> Result<Prediction, EvalError> {
    let out = predict_pointers(params, cfg, &ex.token_ids, &ex.mask)?;
    let j = argmax(&out.loc_dist).unwrap_or(0);
    if j == 0 || confidence.is_some_and(|theta| out.loc_dist[j] < theta) {
        return Ok(Prediction::bug_free());
    }
    let r = top_repair(&out.rep_dist, &ex.mask);
    Ok(Prediction {
        verdict: Verdict::Buggy {
            loc_index: j,
            repair_name: ex.raw_tokens[r].clone(),
            loc_prob: out.loc_dist[j],
            rep_prob: out.rep_dist[r],
        },
    })
}

pub fn predict_joint(
    params: &ModelParams,
    cfg: &ModelConfig,
    ex: &Example,
) -> Result<Prediction, EvalError> {
    predict_joint_with(params, cfg, ex, None)
}

/// Joint-model metrics over a partition.
pub fn evaluate_joint(
    params: &ModelParams,
    cfg: &ModelConfig,
    examples: &[Example],
) -> Result<(Metrics, Vec<Prediction>), EvalError> {
    let preds = examples
        .iter()
        .map(|ex| predict_joint(params, cfg, ex))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((compute_metrics(&preds, examples)?, preds))
}
