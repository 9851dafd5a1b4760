use std::cell::Cell;

use super::{top_repair, EvalError, Prediction, Verdict};
use crate::datagen::{hole_from_example, Example, HoleExample};
use crate::model::{predict_repair, ModelConfig, ModelError, ModelParams};

/// Anything that maps a hole example to a repair distribution.
pub trait RepairModel {
    fn repair_dist(&self, hole: &HoleExample) -> Result<Vec<f64>, ModelError>;
}

/// A trained repair-only network.
#[derive(Debug, Clone, Copy)]
pub struct RepairOnly<'a> {
    pub params: &'a ModelParams,
    pub cfg: &'a ModelConfig,
}

impl RepairModel for RepairOnly<'_> {
    fn repair_dist(&self, hole: &HoleExample) -> Result<Vec<f64>, ModelError> {
        predict_repair(self.params, self.cfg, hole)
    }
}

/// Counts calls to the wrapped model.
#[derive(Debug)]
pub struct CallCounter<M> {
    inner: M,
    calls: Cell<usize>,
}

impl<M> CallCounter<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn reset(&self) {
        self.calls.set(0);
    }
}

impl<M: RepairModel> RepairModel for CallCounter<M> {
    fn repair_dist(&self, hole: &HoleExample) -> Result<Vec<f64>, ModelError> {
        self.calls.set(self.calls.get() + 1);
        self.inner.repair_dist(hole)
    }
}

/// The repair model's top prediction for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPrediction {
    /// Example position of the slot.
    pub slot_index: usize,
    pub original: String,
    pub predicted: String,
    pub prob: f64,
}

impl SlotPrediction {
    pub fn modifies(&self) -> bool {
        self.predicted != self.original
    }
}

/// One model call per slot of `ex`, in slot order.
pub fn slot_predictions<M: RepairModel + ?Sized>(
    model: &M,
    ex: &Example,
) -> Result<Vec<SlotPrediction>, EvalError> {
    ex.slot_positions
        .iter()
        .map(|&p| {
            let hole = hole_from_example(ex, p)?;
            let dist = model.repair_dist(&hole)?;
            let top = top_repair(&dist, &hole.mask);
            Ok(SlotPrediction {
                slot_index: p,
                original: ex.raw_tokens[p].clone(),
                predicted: hole.raw_tokens[top].clone(),
                prob: dist[top],
            })
        })
        .collect()
}

fn buggy(s: &SlotPrediction) -> Prediction {
    Prediction {
        verdict: Verdict::Buggy {
            loc_index: s.slot_index,
            repair_name: s.predicted.clone(),
            loc_prob: s.prob,
            rep_prob: s.prob,
        },
    }
}

/// Keeps predictions with probability at least `tau`, orders them by
/// decreasing probability (lower slot first on ties), and reports the first
/// of at most `k` that changes the program. `k = None` means no limit.
pub fn decide_enumerative(slots: &[SlotPrediction], tau: f64, k: Option<usize>) -> Prediction {
    let mut kept: Vec<&SlotPrediction> = slots.iter().filter(|s| s.prob >= tau).collect();
    kept.sort_by(|a, b| {
        b.prob
            .total_cmp(&a.prob)
            .then(a.slot_index.cmp(&b.slot_index))
    });
    kept.into_iter()
        .take(k.unwrap_or(usize::MAX))
        .find(|s| s.modifies())
        .map(buggy)
        .unwrap_or_else(Prediction::bug_free)
}

/// Threshold-only rule: the most probable modifying prediction at or above
/// `tau`. Written without sorting so it can cross-check
/// [`decide_enumerative`] with `k = None`.
pub fn decide_threshold_only(slots: &[SlotPrediction], tau: f64) -> Prediction {
    let mut best: Option<&SlotPrediction> = None;
    for s in slots {
        if s.prob < tau || !s.modifies() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => s.prob > b.prob || (s.prob == b.prob && s.slot_index < b.slot_index),
        };
        if better {
            best = Some(s);
        }
    }
    best.map(buggy).unwrap_or_else(Prediction::bug_free)
}

pub fn predict_enumerative<M: RepairModel + ?Sized>(
    model: &M,
    ex: &Example,
    tau: f64,
    k: Option<usize>,
) -> Result<Prediction, EvalError> {
    Ok(decide_enumerative(&slot_predictions(model, ex)?, tau, k))
}
