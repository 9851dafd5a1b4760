//! Example construction: buggy, bug-free and hole-ified variants of a
//! function with location and repair supervision.
//!
//! Every example is the function's token sequence with a reserved no-fault
//! token prepended, so program position `i` becomes example position `i + 1`
//! and position 0 always means "no bug".

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocab, HOLE_TOKEN, NO_FAULT_TOKEN};
use super::DatagenError;
use crate::frontend::{FunctionSource, Slot};

/// A joint-model example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub function_id: String,
    pub raw_tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    /// 1 where the token is an occurrence of one of the function's variables.
    pub mask: Vec<u8>,
    pub loc_target: Vec<u8>,
    pub rep_target: Vec<u8>,
    pub is_buggy: bool,
    pub bug_index: Option<usize>,
    pub original_var: Option<String>,
    pub injected_var: Option<String>,
    /// Example positions of every slot of the function, used to build the
    /// enumerative baseline's prediction problems.
    #[serde(default)]
    pub slot_positions: Vec<usize>,
}

/// A repair-only example: the slot's token is replaced by the hole token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoleExample {
    pub function_id: String,
    pub raw_tokens: Vec<String>,
    pub token_ids: Vec<usize>,
    pub mask: Vec<u8>,
    pub loc_target: Vec<u8>,
    pub rep_target: Vec<u8>,
    /// True when a misuse was injected somewhere other than the slot.
    pub is_buggy: bool,
    pub bug_index: Option<usize>,
    pub original_var: Option<String>,
    pub injected_var: Option<String>,
    pub slot_index: usize,
    pub target_var: String,
    pub candidates: BTreeSet<String>,
}

impl Example {
    pub fn len(&self) -> usize {
        self.raw_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_tokens.is_empty()
    }

    pub fn mask_bool(&self) -> Vec<bool> {
        self.mask.iter().map(|&m| m == 1).collect()
    }

    /// Keeps the first `max_tokens` positions. Returns `None` when the bug
    /// position or every repair position would be cut off.
    pub fn truncate(mut self, max_tokens: usize) -> Option<Self> {
        if self.len() <= max_tokens {
            return Some(self);
        }
        if let Some(b) = self.bug_index {
            if b >= max_tokens {
                return None;
            }
            if !self.rep_target[..max_tokens].contains(&1) {
                return None;
            }
        }
        self.raw_tokens.truncate(max_tokens);
        if !self.token_ids.is_empty() {
            self.token_ids.truncate(max_tokens);
        }
        self.mask.truncate(max_tokens);
        self.loc_target.truncate(max_tokens);
        self.rep_target.truncate(max_tokens);
        self.slot_positions.retain(|&p| p < max_tokens);
        Some(self)
    }
}

impl HoleExample {
    pub fn len(&self) -> usize {
        self.raw_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_tokens.is_empty()
    }

    pub fn mask_bool(&self) -> Vec<bool> {
        self.mask.iter().map(|&m| m == 1).collect()
    }

    /// Returns `None` when the hole or every occurrence of the target would
    /// be cut off.
    pub fn truncate(mut self, max_tokens: usize) -> Option<Self> {
        if self.len() <= max_tokens {
            return Some(self);
        }
        if self.slot_index >= max_tokens || !self.rep_target[..max_tokens].contains(&1) {
            return None;
        }
        if self.bug_index.is_some_and(|b| b >= max_tokens) {
            return None;
        }
        self.raw_tokens.truncate(max_tokens);
        if !self.token_ids.is_empty() {
            self.token_ids.truncate(max_tokens);
        }
        self.mask.truncate(max_tokens);
        self.loc_target.truncate(max_tokens);
        self.rep_target.truncate(max_tokens);
        Some(self)
    }
}

/// One-hot location target; `None` marks the no-fault position 0.
pub fn build_loc_vector(n: usize, bug_index: Option<usize>) -> Result<Vec<u8>, DatagenError> {
    let idx = bug_index.unwrap_or(0);
    if idx >= n {
        return Err(DatagenError::IndexOutOfRange { index: idx, len: n });
    }
    let mut v = vec![0; n];
    v[idx] = 1;
    Ok(v)
}

/// 1 at every masked position whose token is `correct_var`.
pub fn build_rep_vector(
    raw_tokens: &[String],
    correct_var: &str,
    mask: &[u8],
) -> Result<Vec<u8>, DatagenError> {
    if raw_tokens.len() != mask.len() {
        return Err(DatagenError::IndexOutOfRange {
            index: mask.len(),
            len: raw_tokens.len(),
        });
    }
    Ok(raw_tokens
        .iter()
        .zip(mask)
        .map(|(t, &m)| u8::from(m == 1 && t == correct_var))
        .collect())
}

fn shifted_tokens(f: &FunctionSource) -> Vec<String> {
    std::iter::once(NO_FAULT_TOKEN.to_string())
        .chain(f.tokens.iter().map(|t| t.text.clone()))
        .collect()
}

fn shifted_mask(f: &FunctionSource) -> Vec<u8> {
    let mut mask = vec![0u8; f.len() + 1];
    for p in f.variable_positions() {
        mask[p + 1] = 1;
    }
    mask
}

fn slot_positions(f: &FunctionSource) -> Vec<usize> {
    f.slots.iter().map(|s| s.token_index + 1).collect()
}

fn check_slot(f: &FunctionSource, slot: &Slot) -> Result<(), DatagenError> {
    let ok = f
        .tokens
        .get(slot.token_index)
        .is_some_and(|t| t.text == slot.var_name);
    if !ok {
        return Err(DatagenError::IndexOutOfRange {
            index: slot.token_index,
            len: f.len(),
        });
    }
    Ok(())
}

/// Replaces the slot's variable by a different candidate drawn uniformly.
pub fn make_buggy<R: Rng + ?Sized>(
    f: &FunctionSource,
    slot: &Slot,
    rng: &mut R,
) -> Result<Example, DatagenError> {
    check_slot(f, slot)?;
    let alternatives: Vec<&String> = slot
        .candidates
        .iter()
        .filter(|c| **c != slot.var_name)
        .collect();
    let injected = alternatives
        .choose(rng)
        .ok_or_else(|| DatagenError::NoAlternative {
            function_id: f.id.clone(),
            index: slot.token_index,
        })?
        .to_string();
    let bug_index = slot.token_index + 1;
    let mut raw_tokens = shifted_tokens(f);
    raw_tokens[bug_index] = injected.clone();
    let mask = shifted_mask(f);
    let loc_target = build_loc_vector(raw_tokens.len(), Some(bug_index))?;
    let rep_target = build_rep_vector(&raw_tokens, &slot.var_name, &mask)?;
    Ok(Example {
        function_id: f.id.clone(),
        raw_tokens,
        token_ids: Vec::new(),
        mask,
        loc_target,
        rep_target,
        is_buggy: true,
        bug_index: Some(bug_index),
        original_var: Some(slot.var_name.clone()),
        injected_var: Some(injected),
        slot_positions: slot_positions(f),
    })
}

/// The function as is, labelled correct.
pub fn make_bugfree(f: &FunctionSource) -> Example {
    let raw_tokens = shifted_tokens(f);
    let n = raw_tokens.len();
    Example {
        function_id: f.id.clone(),
        raw_tokens,
        token_ids: Vec::new(),
        mask: shifted_mask(f),
        loc_target: build_loc_vector(n, None).expect("n >= 1"),
        rep_target: vec![0; n],
        is_buggy: false,
        bug_index: None,
        original_var: None,
        injected_var: None,
        slot_positions: slot_positions(f),
    }
}

/// Replaces the slot's token by the hole token. The target is the variable
/// currently at the slot; the hole itself is outside the repair support.
pub fn make_hole_variant(f: &FunctionSource, slot: &Slot) -> Result<HoleExample, DatagenError> {
    check_slot(f, slot)?;
    let slot_index = slot.token_index + 1;
    let mut raw_tokens = shifted_tokens(f);
    raw_tokens[slot_index] = HOLE_TOKEN.to_string();
    let mut mask = shifted_mask(f);
    mask[slot_index] = 0;
    let rep_target = build_rep_vector(&raw_tokens, &slot.var_name, &mask)?;
    let n = raw_tokens.len();
    Ok(HoleExample {
        function_id: f.id.clone(),
        raw_tokens,
        token_ids: Vec::new(),
        mask,
        loc_target: build_loc_vector(n, None)?,
        rep_target,
        is_buggy: false,
        bug_index: None,
        original_var: None,
        injected_var: None,
        slot_index,
        target_var: slot.var_name.clone(),
        candidates: slot.candidates.clone(),
    })
}

/// Builds the hole variant of an already-constructed example at example
/// position `slot_index` (used by the enumerative baseline on programs of
/// unknown correctness). The target is whatever token is at the slot.
pub fn hole_from_example(ex: &Example, slot_index: usize) -> Result<HoleExample, DatagenError> {
    if slot_index >= ex.len() || slot_index == 0 {
        return Err(DatagenError::IndexOutOfRange {
            index: slot_index,
            len: ex.len(),
        });
    }
    let target_var = ex.raw_tokens[slot_index].clone();
    let mut raw_tokens = ex.raw_tokens.clone();
    raw_tokens[slot_index] = HOLE_TOKEN.to_string();
    let mut token_ids = ex.token_ids.clone();
    if !token_ids.is_empty() {
        token_ids[slot_index] = super::vocab::HOLE_ID;
    }
    let mut mask = ex.mask.clone();
    mask[slot_index] = 0;
    let rep_target = build_rep_vector(&raw_tokens, &target_var, &mask)?;
    let candidates = raw_tokens
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m == 1)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(HoleExample {
        function_id: ex.function_id.clone(),
        raw_tokens,
        token_ids,
        loc_target: build_loc_vector(mask.len(), None)?,
        mask,
        rep_target,
        is_buggy: ex.is_buggy,
        bug_index: ex.bug_index,
        original_var: ex.original_var.clone(),
        injected_var: ex.injected_var.clone(),
        slot_index,
        target_var,
        candidates,
    })
}

pub fn encode_example(mut ex: Example, vocab: &Vocab) -> Example {
    ex.token_ids = ex.raw_tokens.iter().map(|t| vocab.id(t)).collect();
    ex
}

pub fn encode_hole(mut ex: HoleExample, vocab: &Vocab) -> HoleExample {
    ex.token_ids = ex.raw_tokens.iter().map(|t| vocab.id(t)).collect();
    ex
}
