//! Supervised example construction: vocabularies, buggy/bug-free/hole
//! variants, dataset partitions and slot-placement noise.

mod dataset;
mod example;
mod noise;
pub mod synth;
mod vocab;

pub use dataset::{
    function_rng, generate_dataset, generate_hole_dataset, generate_noise_pairs, load_corpus,
    partition_of, read_jsonl, write_jsonl, Dataset, NoiseSet, Partition,
};
pub use example::{
    build_loc_vector, build_rep_vector, encode_example, encode_hole, hole_from_example,
    make_bugfree, make_buggy, make_hole_variant, Example, HoleExample,
};
pub use noise::{inject_noise, NoiseMode, NoisePair};
pub use vocab::{
    build_vocab, Vocab, HOLE_ID, HOLE_TOKEN, NO_FAULT_ID, NO_FAULT_TOKEN, PAD_ID, PAD_TOKEN,
    UNK_ID, UNK_TOKEN,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{LexError, ParseError};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{function_id}: slot at token {index} has no alternative candidate")]
    NoAlternative { function_id: String, index: usize },
    #[error("{function_id}: no eligible location for noise injection")]
    NoEligibleLocation { function_id: String },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{path}: {source}")]
    Lex { path: String, source: LexError },
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Dataset generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatagenConfig {
    pub max_tokens: usize,
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    /// Caps the number of test functions, taken in corpus order.
    pub max_test_functions: Option<usize>,
    pub vocab_size: usize,
    /// Near noise: how many uses away from the slot, counted on both sides.
    pub near_window: usize,
    /// Near noise: corrupted use must sit before this program token index.
    pub near_max_token: usize,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        Self {
            max_tokens: 250,
            train_fraction: 0.8,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            max_test_functions: None,
            vocab_size: 10_000,
            near_window: 2,
            near_max_token: 30,
        }
    }
}

impl DatagenConfig {
    pub fn validate(&self) -> Result<(), DatagenError> {
        let fractions = [self.train_fraction, self.valid_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(DatagenError::Config("split fractions must lie in [0, 1]".into()));
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DatagenError::Config(format!(
                "split fractions sum to {total}, expected 1"
            )));
        }
        if self.max_tokens < 2 {
            return Err(DatagenError::Config("max_tokens must be at least 2".into()));
        }
        if self.near_window == 0 {
            return Err(DatagenError::Config("near_window must be positive".into()));
        }
        Ok(())
    }
}
