//! Two-headed pointer network over an LSTM encoding of the token sequence.
//!
//! Hidden states are kept row-major (`n×h`), so the attention of the
//! column-major formulation becomes `M = tanh(S·W1 + 1ₙ·(hₙ·W2))` and the
//! head logits are `M·W` with one column per head: column 0 locates, column
//! 1 repairs.

mod forward;
mod params;

pub use forward::{
    encode_sequence, joint_loss, loss_loc, loss_rep, pointer_heads, predict_pointers,
    predict_repair, repair_loss, PointerOutput, PointerVars,
};
pub use params::{ModelParams, ParamVars, PARAM_NAMES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::TensorError;

/// Log-probabilities are floored at this value.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("repair target is empty")]
    EmptyTarget,
    #[error("sequence of {len} tokens exceeds max_tokens {max}")]
    TooLong { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    UnknownId { id: usize, vocab: usize },
    #[error("input lengths disagree: {0}")]
    Length(&'static str),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MaskMode {
    /// No masking; both heads range over every position.
    None,
    /// Hidden states of non-variable positions are zeroed before attention.
    Hidden,
    /// Logits outside each head's support are set to `-inf`.
    Logits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RepLossMode {
    /// `-log Σ p` over target positions.
    SumProb,
    /// `-Σ log p` over target positions.
    SumLog,
    /// `-log max p` over target positions.
    MaxProb,
}

impl std::str::FromStr for MaskMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "hidden" => Ok(Self::Hidden),
            "logits" => Ok(Self::Logits),
            _ => Err(format!("unknown mask mode {s:?} (none, hidden, logits)")),
        }
    }
}

impl std::str::FromStr for RepLossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sum_prob" => Ok(Self::SumProb),
            "sum_log" => Ok(Self::SumLog),
            "max_prob" => Ok(Self::MaxProb),
            _ => Err(format!("unknown repair loss {s:?} (sum_prob, sum_log, max_prob)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub mask_mode: MaskMode,
    pub rep_loss_mode: RepLossMode,
    pub max_tokens: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 10_000,
            embed_dim: 64,
            hidden_dim: 128,
            mask_mode: MaskMode::Logits,
            rep_loss_mode: RepLossMode::SumProb,
            max_tokens: 250,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden_dim == 0 {
            return Err(ModelError::Config(
                "vocab_size, embed_dim and hidden_dim must be positive".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(ModelError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }
}
