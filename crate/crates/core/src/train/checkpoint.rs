use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogRow, TrainConfig, TrainError};
use crate::model::{ModelConfig, ModelParams, PARAM_NAMES};
use crate::tensor::checkpoint::{read_tensors, write_tensors, CheckpointError};
use crate::tensor::{AdamState, Tensor};

/// Parameters, optimizer state and the configurations that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub params: ModelParams,
    pub adam: AdamState,
    pub step: u64,
    pub epoch: usize,
    pub best_valid_metric: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model_config: ModelConfig,
    train_config: TrainConfig,
    epoch: usize,
    best_valid_metric: Option<f64>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let meta = serde_json::to_value(Meta {
            model_config: self.model_config.clone(),
            train_config: self.train_config.clone(),
            epoch: self.epoch,
            best_valid_metric: self.best_valid_metric,
        })?;
        let mut named: Vec<(String, &Tensor)> = Vec::new();
        for (name, t) in PARAM_NAMES.iter().zip(self.params.tensors()) {
            named.push((name.to_string(), t));
        }
        for (name, t) in PARAM_NAMES.iter().zip(&self.adam.m) {
            named.push((format!("adam.m.{name}"), t));
        }
        for (name, t) in PARAM_NAMES.iter().zip(&self.adam.v) {
            named.push((format!("adam.v.{name}"), t));
        }
        let w = BufWriter::new(fs::File::create(path)?);
        write_tensors(w, self.adam.step, meta, &named)?;
        Ok(())
    }

    /// Reads a checkpoint. With `expected`, every parameter shape must match
    /// that configuration.
    pub fn load(path: &Path, expected: Option<&ModelConfig>) -> Result<Self, TrainError> {
        let (header, tensors) = read_tensors(BufReader::new(fs::File::open(path)?))?;
        let meta: Meta = serde_json::from_value(header.meta)?;
        let cfg = expected.unwrap_or(&meta.model_config);
        let shapes = ModelParams::shapes(cfg);
        let mut by_name: std::collections::HashMap<String, Tensor> = header
            .tensors
            .iter()
            .map(|e| e.name.clone())
            .zip(tensors)
            .collect();
        let mut take = |name: String, shape: [usize; 2]| -> Result<Tensor, TrainError> {
            let t = by_name
                .remove(&name)
                .ok_or_else(|| CheckpointError::Missing(name.clone()))?;
            if t.shape() != shape {
                return Err(TrainError::ShapeMismatch {
                    name,
                    expected: shape.to_vec(),
                    found: t.shape().to_vec(),
                });
            }
            Ok(t)
        };
        let mut params = Vec::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, shape) in PARAM_NAMES.iter().zip(shapes) {
            params.push(take(name.to_string(), shape)?);
        }
        for (name, shape) in PARAM_NAMES.iter().zip(shapes) {
            m.push(take(format!("adam.m.{name}"), shape)?);
            v.push(take(format!("adam.v.{name}"), shape)?);
        }
        Ok(Self {
            model_config: cfg.clone(),
            train_config: meta.train_config,
            params: ModelParams::from_vec(cfg, params)?,
            adam: AdamState {
                step: header.step,
                m,
                v,
            },
            step: header.step,
            epoch: meta.epoch,
            best_valid_metric: meta.best_valid_metric,
        })
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_log_csv(path: &Path, rows: &[LogRow]) -> Result<(), TrainError> {
    let mut out = String::from("step,epoch,train_loss,valid_loss,valid_metric\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step,
            r.epoch,
            r.train_loss,
            opt(r.valid_loss),
            opt(r.valid_metric)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_log_csv(path: &Path) -> Result<Vec<LogRow>, TrainError> {
    let text = fs::read_to_string(path)?;
    let bad = |line: &str| TrainError::Config(format!("malformed log line {line:?}"));
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(line));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        rows.push(LogRow {
            step: f[0].parse().map_err(|_| bad(line))?,
            epoch: f[1].parse().map_err(|_| bad(line))?,
            train_loss: num(f[2])?,
            valid_loss: maybe(f[3])?,
            valid_metric: maybe(f[4])?,
        });
    }
    Ok(rows)
}

/// Plain-text summary stored next to a checkpoint.
pub fn model_card(cfg: &ModelConfig, kind: super::ModelKind, vocab_hash: &str) -> String {
    format!(
        "model: {kind:?}\nvocab_size: {}\nembed_dim (d): {}\nhidden_dim (h): {}\nmask_mode: {:?}\nrep_loss_mode: {:?}\nmax_tokens: {}\nvocab_sha256: {vocab_hash}\n",
        cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.mask_mode, cfg.rep_loss_mode, cfg.max_tokens
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{init_params, ModelKind};

    fn ckpt(h: usize) -> Checkpoint {
        let mc = ModelConfig {
            vocab_size: 12,
            embed_dim: 3,
            hidden_dim: h,
            ..ModelConfig::default()
        };
        let params = init_params(&mc, 9).unwrap();
        let mut adam = AdamState::new(&params.to_vec());
        adam.step = 17;
        adam.m[2].data_mut()[1] = 0.25;
        adam.v[6].data_mut()[0] = 1e-7;
        Checkpoint {
            model_config: mc,
            train_config: TrainConfig::default(),
            params,
            adam,
            step: 17,
            epoch: 2,
            best_valid_metric: Some(0.5),
        }
    }

    #[test]
    fn round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let c = ckpt(4);
        c.save(&p).unwrap();
        let back = Checkpoint::load(&p, None).unwrap();
        assert_eq!(back, c);
        for (a, b) in back.params.tensors().iter().zip(c.params.tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_and_mismatched() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let c = ckpt(16);
        c.save(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let q = dir.path().join("short.bin");
        fs::write(&q, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            Checkpoint::load(&q, None),
            Err(TrainError::Checkpoint(CheckpointError::Io(_)))
        ));
        let wider = ModelConfig {
            hidden_dim: 32,
            ..c.model_config.clone()
        };
        assert!(matches!(
            Checkpoint::load(&p, Some(&wider)),
            Err(TrainError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn log_round_trip_and_card() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        let rows = vec![
            LogRow { step: 1, epoch: 0, train_loss: 2.5, valid_loss: None, valid_metric: None },
            LogRow { step: 2, epoch: 0, train_loss: 0.1 + 0.2, valid_loss: Some(1.75), valid_metric: Some(0.5) },
        ];
        write_log_csv(&p, &rows).unwrap();
        assert_eq!(read_log_csv(&p).unwrap(), rows);
        let card = model_card(&ckpt(4).model_config, ModelKind::Joint, "abc");
        assert!(card.contains("hidden_dim (h): 4") && card.contains("vocab_sha256: abc"));
    }
}
