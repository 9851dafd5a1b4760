//! Seeded mini-batch training with validation, early stopping and
//! checkpoints, for the joint model and the repair-only model.
//!
//! Each example is run on its own tape; gradients are summed over the batch
//! in batch order and divided by the batch size, which yields the gradient
//! of the mean batch loss without any padding.

mod checkpoint;

pub use checkpoint::{model_card, read_log_csv, write_log_csv, Checkpoint};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{Example, HoleExample};
use crate::eval::{compute_metrics, top_repair, EvalError, Prediction, Verdict};
use crate::model::{
    encode_sequence, loss_loc, loss_rep, pointer_heads, repair_loss, ModelConfig, ModelError,
    ModelParams, ParamVars,
};
use crate::tensor::checkpoint::CheckpointError;
use crate::tensor::{adam_step, AdamConfig, AdamState, Tape, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset does not match model kind {0:?}")]
    DatasetModelMismatch(ModelKind),
    #[error("non-finite loss at step {step}; batch example ids {ids:?}")]
    NonFiniteLoss { step: u64, ids: Vec<String> },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("checkpoint tensor {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    Joint,
    RepairOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Evaluations without improvement before stopping.
    pub early_stop_patience: usize,
    /// Optimizer steps between validation passes.
    pub eval_every: usize,
    pub model: ModelKind,
    /// Stops after the first batch that ends past this many seconds.
    pub time_budget_secs: Option<f64>,
    /// Stops once the validation metric reaches this value.
    pub target_metric: Option<f64>,
    /// Decays the learning rate linearly from `adam.lr` towards this
    /// fraction of it over the planned steps.
    pub lr_decay_to: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 10,
            adam: AdamConfig::default(),
            seed: 0,
            early_stop_patience: 5,
            eval_every: 100,
            model: ModelKind::Joint,
            time_budget_secs: None,
            target_metric: None,
            lr_decay_to: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.eval_every == 0 || self.early_stop_patience == 0 {
            return Err(TrainError::Config(
                "batch_size, eval_every and early_stop_patience must be positive".into(),
            ));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(TrainError::Config("invalid Adam settings".into()));
        }
        if self.lr_decay_to.is_some_and(|f| !(f > 0.0 && f <= 1.0)) {
            return Err(TrainError::Config("lr_decay_to must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Training and validation data of one kind.
#[derive(Debug, Clone, Copy)]
pub enum TrainData<'a> {
    Joint {
        train: &'a [Example],
        valid: &'a [Example],
    },
    Repair {
        train: &'a [HoleExample],
        valid: &'a [HoleExample],
    },
}

impl TrainData<'_> {
    fn kind(&self) -> ModelKind {
        match self {
            TrainData::Joint { .. } => ModelKind::Joint,
            TrainData::Repair { .. } => ModelKind::RepairOnly,
        }
    }

    fn train_len(&self) -> usize {
        match self {
            TrainData::Joint { train, .. } => train.len(),
            TrainData::Repair { train, .. } => train.len(),
        }
    }

    fn train_id(&self, i: usize) -> String {
        match self {
            TrainData::Joint { train, .. } => train[i].function_id.clone(),
            TrainData::Repair { train, .. } => train[i].function_id.clone(),
        }
    }

    fn train_loss<'t>(
        &self,
        tape: &'t Tape,
        p: &ParamVars<'t>,
        cfg: &ModelConfig,
        i: usize,
    ) -> Result<crate::tensor::Var<'t>, ModelError> {
        match self {
            TrainData::Joint { train, .. } => crate::model::joint_loss(tape, p, cfg, &train[i]),
            TrainData::Repair { train, .. } => repair_loss(tape, p, cfg, &train[i]),
        }
    }
}

/// One row per optimizer step; validation columns are filled on
/// evaluation steps only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation metric seen.
    pub best: Checkpoint,
    /// Parameters at the end of training.
    pub last: Checkpoint,
    pub log: Vec<LogRow>,
}

/// Mean loss and the kind-specific accuracy (localization+repair for the
/// joint model, repair for the repair-only model) over examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: f64,
}

fn joint_eval_one(
    params: &ModelParams,
    cfg: &ModelConfig,
    ex: &Example,
) -> Result<(f64, Prediction), ModelError> {
    let tape = Tape::new();
    let p = params.record(&tape, false);
    let (states, hn) = encode_sequence(&tape, &p, &ex.token_ids)?;
    let mask: Vec<bool> = ex.mask.iter().map(|&m| m == 1).collect();
    let out = pointer_heads(&p, states, hn, &mask, cfg.mask_mode)?;
    let mut loss = loss_loc(out.loc, &ex.loc_target)?.item()?;
    if ex.is_buggy {
        loss += loss_rep(&tape, out.rep, &ex.rep_target, cfg.rep_loss_mode)?.item()?;
    }
    let loc = out.loc.value().into_data();
    let rep = out.rep.value().into_data();
    let j = crate::eval::argmax(&loc).unwrap_or(0);
    let pred = if j == 0 {
        Prediction::bug_free()
    } else {
        let r = top_repair(&rep, &ex.mask);
        Prediction {
            verdict: Verdict::Buggy {
                loc_index: j,
                repair_name: ex.raw_tokens[r].clone(),
                loc_prob: loc[j],
                rep_prob: rep[r],
            },
        }
    };
    Ok((loss, pred))
}

fn repair_eval_one(
    params: &ModelParams,
    cfg: &ModelConfig,
    ex: &HoleExample,
) -> Result<(f64, bool), ModelError> {
    let tape = Tape::new();
    let p = params.record(&tape, false);
    let loss = repair_loss(&tape, &p, cfg, ex)?;
    let dist = crate::model::predict_repair(params, cfg, ex)?;
    let top = top_repair(&dist, &ex.mask);
    Ok((loss.item()?, ex.raw_tokens[top] == ex.target_var))
}

pub fn evaluate_joint_examples(
    params: &ModelParams,
    cfg: &ModelConfig,
    examples: &[Example],
) -> Result<Evaluation, TrainError> {
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(examples.len());
    for ex in examples {
        let (l, p) = joint_eval_one(params, cfg, ex)?;
        total += l;
        preds.push(p);
    }
    let m = compute_metrics(&preds, examples)?;
    Ok(Evaluation {
        loss: total / examples.len() as f64,
        metric: m.loc_repair_accuracy,
    })
}

pub fn evaluate_repair_examples(
    params: &ModelParams,
    cfg: &ModelConfig,
    examples: &[HoleExample],
) -> Result<Evaluation, TrainError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyPartition.into());
    }
    let mut total = 0.0;
    let mut hits = 0;
    for ex in examples {
        let (l, ok) = repair_eval_one(params, cfg, ex)?;
        total += l;
        hits += usize::from(ok);
    }
    let n = examples.len() as f64;
    Ok(Evaluation {
        loss: total / n,
        metric: hits as f64 / n,
    })
}

fn evaluate_valid(
    params: &ModelParams,
    cfg: &ModelConfig,
    data: &TrainData,
) -> Result<Option<Evaluation>, TrainError> {
    match data {
        TrainData::Joint { valid, .. } if !valid.is_empty() => {
            evaluate_joint_examples(params, cfg, valid).map(Some)
        }
        TrainData::Repair { valid, .. } if !valid.is_empty() => {
            evaluate_repair_examples(params, cfg, valid).map(Some)
        }
        _ => Ok(None),
    }
}

/// Initial parameters for a training run; a function of the seed alone.
pub fn init_params(model_cfg: &ModelConfig, seed: u64) -> Result<ModelParams, ModelError> {
    ModelParams::init(model_cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Gradient of the mean loss over `batch`, and that mean.
fn batch_gradient(
    params: &ModelParams,
    cfg: &ModelConfig,
    data: &TrainData,
    batch: &[usize],
) -> Result<(Vec<Tensor>, f64), TrainError> {
    let mut grads: Vec<Tensor> = params
        .tensors()
        .iter()
        .map(|t| Tensor::zeros(t.rows(), t.cols()))
        .collect();
    let mut total = 0.0;
    for &i in batch {
        let tape = Tape::new();
        let p = params.record(&tape, true);
        let loss = data.train_loss(&tape, &p, cfg, i)?;
        total += loss.item()?;
        tape.backward(loss)?;
        for (acc, v) in grads.iter_mut().zip(p.all()) {
            if let Some(g) = v.grad() {
                acc.data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(a, b)| *a += b);
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        g.data_mut().iter_mut().for_each(|x| *x *= scale);
    }
    Ok((grads, total * scale))
}

pub fn train(
    data: TrainData,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    model_cfg.validate()?;
    if data.kind() != cfg.model {
        return Err(TrainError::DatasetModelMismatch(cfg.model));
    }
    let n = data.train_len();
    if n == 0 {
        return Err(TrainError::EmptyTrainSet);
    }
    let started = Instant::now();
    let mut params = init_params(model_cfg, cfg.seed)?;
    let mut adam = AdamState::new(&params.to_vec());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5348_5546_464c_4521);
    let snapshot = |params: &ModelParams, adam: &AdamState, step: u64, epoch: usize, metric| {
        Checkpoint {
            model_config: model_cfg.clone(),
            train_config: cfg.clone(),
            params: params.clone(),
            adam: adam.clone(),
            step,
            epoch,
            best_valid_metric: metric,
        }
    };

    let mut log = Vec::new();
    let mut best = snapshot(&params, &adam, 0, 0, None);
    let mut best_key: Option<(f64, f64)> = None;
    let mut stale = 0;
    let mut step = 0u64;
    let mut last_eval_step = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    let planned = (cfg.epochs * n.div_ceil(cfg.batch_size)) as f64;
    let mut adam_cfg = cfg.adam;

    let mut consider = |ev: Option<Evaluation>,
                        params: &ModelParams,
                        adam: &AdamState,
                        step: u64,
                        epoch: usize,
                        best: &mut Checkpoint|
     -> bool {
        let Some(ev) = ev else {
            *best = snapshot(params, adam, step, epoch, None);
            return false;
        };
        let better = match best_key {
            None => true,
            Some((m, l)) => ev.metric > m || (ev.metric == m && ev.loss < l),
        };
        if better {
            best_key = Some((ev.metric, ev.loss));
            *best = snapshot(params, adam, step, epoch, Some(ev.metric));
            stale = 0;
        } else {
            stale += 1;
        }
        stale >= cfg.early_stop_patience || cfg.target_metric.is_some_and(|t| ev.metric >= t)
    };

    let mut epoch = 0;
    'outer: while epoch < cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let (grads, loss) = batch_gradient(&params, model_cfg, &data, batch)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(TrainError::NonFiniteLoss {
                    step,
                    ids: batch.iter().map(|&i| data.train_id(i)).collect(),
                });
            }
            let mut tensors = params.to_vec();
            if let Some(f) = cfg.lr_decay_to {
                adam_cfg.lr = cfg.adam.lr * (1.0 - (1.0 - f) * step as f64 / planned);
            }
            adam_step(&mut tensors, &grads, &mut adam, &adam_cfg)?;
            params = ModelParams::from_vec(model_cfg, tensors)?;
            step += 1;
            let mut row = LogRow {
                step,
                epoch,
                train_loss: loss,
                valid_loss: None,
                valid_metric: None,
            };
            let mut stop = false;
            if step.is_multiple_of(cfg.eval_every as u64) {
                let ev = evaluate_valid(&params, model_cfg, &data)?;
                row.valid_loss = ev.map(|e| e.loss);
                row.valid_metric = ev.map(|e| e.metric);
                last_eval_step = step;
                stop = consider(ev, &params, &adam, step, epoch, &mut best);
            }
            log.push(row);
            let out_of_time = cfg
                .time_budget_secs
                .is_some_and(|b| started.elapsed().as_secs_f64() > b);
            if stop || out_of_time {
                break 'outer;
            }
        }
        epoch += 1;
    }
    if step > last_eval_step {
        let ev = evaluate_valid(&params, model_cfg, &data)?;
        if let Some(row) = log.last_mut() {
            row.valid_loss = ev.map(|e| e.loss);
            row.valid_metric = ev.map(|e| e.metric);
        }
        consider(ev, &params, &adam, step, epoch.min(cfg.epochs.saturating_sub(1)), &mut best);
    }
    let last = snapshot(&params, &adam, step, epoch, best.best_valid_metric);
    Ok(TrainOutcome { best, last, log })
}
