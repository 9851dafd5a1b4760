use serde::{Deserialize, Serialize};

use super::{top_repair, EvalError, RepairModel};
use crate::datagen::{HoleExample, NoisePair};

/// Repair accuracy on clean and noisy inputs at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub tau: f64,
    pub clean: f64,
    pub noisy: f64,
    pub drop: f64,
}

fn top<M: RepairModel + ?Sized>(model: &M, h: &HoleExample) -> Result<(bool, f64), EvalError> {
    let dist = model.repair_dist(h)?;
    let i = top_repair(&dist, &h.mask);
    Ok((h.raw_tokens[i] == h.target_var, dist[i]))
}

fn check_pair(p: &NoisePair) -> Result<(), EvalError> {
    let (c, n) = (&p.clean, &p.noisy);
    if c.function_id != n.function_id
        || c.slot_index != n.slot_index
        || c.target_var != n.target_var
        || c.len() != n.len()
    {
        return Err(EvalError::Pairing(format!(
            "{} (slot {}) vs {} (slot {})",
            c.function_id, c.slot_index, n.function_id, n.slot_index
        )));
    }
    Ok(())
}

/// For each `tau`, the share of examples whose top repair is correct with
/// probability at least `tau`, on the clean and on the noisy member of
/// every pair.
pub fn run_noise_experiment<M: RepairModel + ?Sized>(
    model: &M,
    pairs: &[NoisePair],
    taus: &[f64],
) -> Result<Vec<NoiseRow>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyPartition);
    }
    let mut tops = Vec::with_capacity(pairs.len());
    for p in pairs {
        check_pair(p)?;
        tops.push((top(model, &p.clean)?, top(model, &p.noisy)?));
    }
    let n = pairs.len() as f64;
    Ok(taus
        .iter()
        .map(|&tau| {
            let hit = |(ok, prob): (bool, f64)| ok && prob >= tau;
            let clean = tops.iter().filter(|(c, _)| hit(*c)).count() as f64 / n;
            let noisy = tops.iter().filter(|(_, x)| hit(*x)).count() as f64 / n;
            NoiseRow {
                tau,
                clean,
                noisy,
                drop: clean - noisy,
            }
        })
        .collect())
}
