use std::path::Path;

use varmisuse_core::datagen::synth::{generate_corpus, SynthConfig};
use varmisuse_core::datagen::{build_vocab, generate_dataset, load_corpus, DatagenConfig};
use varmisuse_core::eval::evaluate_joint;
use varmisuse_core::tensor::AdamConfig;
use varmisuse_core::train::{train, TrainData};
use varmisuse_core::{Dataset, ModelConfig, TrainConfig, Vocab};

fn toy(n: usize, seed: u64, cfg: &DatagenConfig, dir: &Path) -> (Vocab, Dataset) {
    std::fs::write(dir.join("toy.py"), generate_corpus(&SynthConfig::default(), n, seed)).unwrap();
    let fns = load_corpus(dir, false).unwrap();
    let vocab = build_vocab(&fns, cfg.vocab_size).unwrap();
    let ds = generate_dataset(&fns, &vocab, cfg, seed).unwrap();
    (vocab, ds)
}

#[test]
fn smoothed_loss_decreases_over_first_200_steps() {
    let dir = tempfile::tempdir().unwrap();
    let (vocab, ds) = toy(300, 11, &DatagenConfig::default(), dir.path());
    let mc = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: 16,
        hidden_dim: 32,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        batch_size: 32,
        epochs: 4,
        eval_every: 200,
        early_stop_patience: 100,
        adam: AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = train(TrainData::Joint { train: &ds.train[..2000], valid: &ds.valid }, &mc, &tc).unwrap();
    let losses: Vec<f64> = out.log.iter().take(200).map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 200);
    let smoothed: Vec<f64> = losses.chunks(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    for (i, w) in smoothed.windows(2).enumerate() {
        assert!(w[1] < w[0], "20-step mean rose after step {}: {} -> {}", 20 * (i + 1), w[0], w[1]);
    }
}

#[test]
fn small_model_memorises_fifty_examples() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatagenConfig {
        train_fraction: 0.0,
        valid_fraction: 0.0,
        test_fraction: 1.0,
        ..DatagenConfig::default()
    };
    let (vocab, ds) = toy(60, 5, &cfg, dir.path());
    // one buggy and one bug-free example from each of 25 functions
    let subset = &ds.test[..50];
    let mc = ModelConfig {
        vocab_size: vocab.len(),
        embed_dim: 8,
        hidden_dim: 16,
        ..ModelConfig::default()
    };
    let tc = TrainConfig {
        batch_size: 10,
        epochs: 500,
        eval_every: 1000,
        early_stop_patience: 10_000,
        adam: AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let out = train(TrainData::Joint { train: subset, valid: subset }, &mc, &tc).unwrap();
    let tail: Vec<f64> = out.log.iter().rev().take(5).map(|r| r.train_loss).collect();
    let final_loss = tail.iter().sum::<f64>() / tail.len() as f64;
    let (m, _) = evaluate_joint(&out.last.params, &mc, subset).unwrap();
    assert!(final_loss < 0.05, "final train loss {final_loss}");
    assert!(m.loc_repair_accuracy >= 0.95, "loc+repair {}", m.loc_repair_accuracy);
}
