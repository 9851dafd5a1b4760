use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::example::{build_rep_vector, make_hole_variant, HoleExample};
use super::DatagenConfig;
use super::DatagenError;
use crate::frontend::FunctionSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseMode {
    /// Any other use in the function.
    Any,
    /// Uses within `near_window` use positions of the slot, inside the
    /// first `near_max_token` program tokens.
    Near,
}

/// A hole example and the same example with one other use corrupted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisePair {
    pub clean: HoleExample,
    pub noisy: HoleExample,
}

/// Holes the slot at rank `slot_rank` and corrupts one other use, chosen
/// uniformly among the eligible ones, with a uniformly chosen different
/// in-scope variable.
pub fn inject_noise<R: Rng + ?Sized>(
    f: &FunctionSource,
    slot_rank: usize,
    mode: NoiseMode,
    rng: &mut R,
    cfg: &DatagenConfig,
) -> Result<NoisePair, DatagenError> {
    let slot = f.slots.get(slot_rank).ok_or(DatagenError::IndexOutOfRange {
        index: slot_rank,
        len: f.slots.len(),
    })?;
    let eligible: Vec<usize> = (0..f.slots.len())
        .filter(|&r| r != slot_rank)
        .filter(|&r| match mode {
            NoiseMode::Any => true,
            NoiseMode::Near => {
                r.abs_diff(slot_rank) <= cfg.near_window
                    && f.slots[r].token_index < cfg.near_max_token
            }
        })
        .collect();
    let no_location = || DatagenError::NoEligibleLocation {
        function_id: f.id.clone(),
    };
    let &victim_rank = eligible.choose(rng).ok_or_else(no_location)?;
    let victim = &f.slots[victim_rank];
    let replacements: Vec<&String> = victim
        .candidates
        .iter()
        .filter(|c| **c != victim.var_name)
        .collect();
    let injected = replacements
        .choose(rng)
        .ok_or_else(|| DatagenError::NoAlternative {
            function_id: f.id.clone(),
            index: victim.token_index,
        })?
        .to_string();

    let clean = make_hole_variant(f, slot)?;
    let mut noisy = clean.clone();
    let pos = victim.token_index + 1;
    noisy.raw_tokens[pos] = injected.clone();
    noisy.rep_target = build_rep_vector(&noisy.raw_tokens, &noisy.target_var, &noisy.mask)?;
    noisy.is_buggy = true;
    noisy.bug_index = Some(pos);
    noisy.original_var = Some(victim.var_name.clone());
    noisy.injected_var = Some(injected);
    Ok(NoisePair { clean, noisy })
}
