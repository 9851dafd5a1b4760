//! Shared fixtures for the benchmarks.

use varmisuse_core::datagen::synth::{generate_corpus, SynthConfig};
use varmisuse_core::datagen::{build_vocab, generate_dataset, DatagenConfig};
use varmisuse_core::frontend::{extract_functions, tokenize, FunctionSource};
use varmisuse_core::train::init_params;
use varmisuse_core::{Dataset, ModelConfig, ModelParams, Vocab};

pub fn corpus_text(functions: usize) -> String {
    generate_corpus(&SynthConfig::default(), functions, 11)
}

pub fn corpus(functions: usize) -> Vec<FunctionSource> {
    let mut fns = extract_functions(&tokenize(&corpus_text(functions)).unwrap()).unwrap();
    for f in &mut fns {
        f.id = format!("bench.py:{}", f.id);
    }
    fns
}

pub struct Fixture {
    pub vocab: Vocab,
    pub dataset: Dataset,
    pub model_config: ModelConfig,
    pub params: ModelParams,
}

/// A small dataset and a freshly initialised model of the given width.
pub fn fixture(functions: usize, embed_dim: usize, hidden_dim: usize) -> Fixture {
    let fns = corpus(functions);
    let cfg = DatagenConfig::default();
    let vocab = build_vocab(&fns, cfg.vocab_size).unwrap();
    let dataset = generate_dataset(&fns, &vocab, &cfg, 11).unwrap();
    let model_config = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim,
        hidden_dim,
        ..ModelConfig::default()
    };
    let params = init_params(&model_config, 11).unwrap();
    Fixture {
        vocab,
        dataset,
        model_config,
        params,
    }
}
