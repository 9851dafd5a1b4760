use super::params::{ModelParams, ParamVars};
use super::{MaskMode, ModelConfig, ModelError, RepLossMode, LOG_FLOOR};
use crate::datagen::{Example, HoleExample};
use crate::tensor::{Axis, Tape, Tensor, Var};

/// Location and repair distributions, each `n×1`.
#[derive(Debug, Clone, Copy)]
pub struct PointerVars<'t> {
    pub loc: Var<'t>,
    pub rep: Var<'t>,
}

/// Plain-value pointer distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerOutput {
    pub loc_dist: Vec<f64>,
    pub rep_dist: Vec<f64>,
}

fn check_ids(cfg: &ModelConfig, ids: &[usize]) -> Result<(), ModelError> {
    if ids.is_empty() {
        return Err(ModelError::Length("empty token sequence"));
    }
    if ids.len() > cfg.max_tokens {
        return Err(ModelError::TooLong {
            len: ids.len(),
            max: cfg.max_tokens,
        });
    }
    if let Some(&id) = ids.iter().find(|&&id| id >= cfg.vocab_size) {
        return Err(ModelError::UnknownId {
            id,
            vocab: cfg.vocab_size,
        });
    }
    Ok(())
}

/// Embeds `ids` and runs the LSTM from a zero state. Returns all hidden
/// states as an `n×h` matrix and the final state as `1×h`.
pub fn encode_sequence<'t>(
    tape: &'t Tape,
    p: &ParamVars<'t>,
    ids: &[usize],
) -> Result<(Var<'t>, Var<'t>), ModelError> {
    if ids.is_empty() {
        return Err(ModelError::Length("empty token sequence"));
    }
    let n = ids.len();
    let h = p.lstm_wh.shape()[0];
    let emb = tape.gather_rows(p.embedding, ids)?;
    let x_proj = emb.matmul(p.lstm_wx)?.add(p.lstm_b.repeat_rows(n)?)?;

    let mut states = Vec::with_capacity(n);
    let mut prev: Option<(Var<'t>, Var<'t>)> = None;
    for t in 0..n {
        let mut gates = x_proj.slice_rows(t, 1)?;
        if let Some((h_prev, _)) = prev {
            gates = gates.add(h_prev.matmul(p.lstm_wh)?)?;
        }
        let i = gates.slice_cols(0, h)?.sigmoid();
        let f = gates.slice_cols(h, h)?.sigmoid();
        let g = gates.slice_cols(2 * h, h)?.tanh();
        let o = gates.slice_cols(3 * h, h)?.sigmoid();
        let mut c = i.mul(g)?;
        if let Some((_, c_prev)) = prev {
            c = f.mul(c_prev)?.add(c)?;
        }
        let h_t = o.mul(c.tanh())?;
        states.push(h_t);
        prev = Some((h_t, c));
    }
    let hn = prev.expect("n >= 1").0;
    Ok((tape.concat_rows(&states)?, hn))
}

fn pointer_logits<'t>(
    p: &ParamVars<'t>,
    states: Var<'t>,
    hn: Var<'t>,
    mask: &[bool],
    mode: MaskMode,
) -> Result<Var<'t>, ModelError> {
    let n = states.shape()[0];
    if mask.len() != n {
        return Err(ModelError::Length("mask and sequence"));
    }
    let s = match mode {
        MaskMode::Hidden => states.masked_fill(mask, Axis::Rows, 0.0)?,
        MaskMode::None | MaskMode::Logits => states,
    };
    let query = hn.matmul(p.w2)?.repeat_rows(n)?;
    let m = s.matmul(p.w1)?.add(query)?.tanh();
    Ok(m.matmul(p.w_out)?)
}

/// Both pointer distributions over the `n` positions. Under
/// [`MaskMode::Logits`] the location head ranges over the variable
/// positions plus position 0 and the repair head over the variable
/// positions only.
pub fn pointer_heads<'t>(
    p: &ParamVars<'t>,
    states: Var<'t>,
    hn: Var<'t>,
    mask: &[bool],
    mode: MaskMode,
) -> Result<PointerVars<'t>, ModelError> {
    let logits = pointer_logits(p, states, hn, mask, mode)?;
    let mut loc = logits.slice_cols(0, 1)?;
    let mut rep = logits.slice_cols(1, 1)?;
    if mode == MaskMode::Logits {
        let mut loc_support = mask.to_vec();
        loc_support[0] = true;
        loc = loc.masked_fill(&loc_support, Axis::Rows, f64::NEG_INFINITY)?;
        rep = rep.masked_fill(mask, Axis::Rows, f64::NEG_INFINITY)?;
    }
    Ok(PointerVars {
        loc: loc.softmax(Axis::Rows)?,
        rep: rep.softmax(Axis::Rows)?,
    })
}

/// Repair distribution of the repair-only model: the repair column of the
/// same heads, always restricted to the variable positions.
fn repair_head<'t>(
    p: &ParamVars<'t>,
    states: Var<'t>,
    hn: Var<'t>,
    mask: &[bool],
    mode: MaskMode,
) -> Result<Var<'t>, ModelError> {
    let logits = pointer_logits(p, states, hn, mask, mode)?;
    let rep = logits
        .slice_cols(1, 1)?
        .masked_fill(mask, Axis::Rows, f64::NEG_INFINITY)?;
    Ok(rep.softmax(Axis::Rows)?)
}

fn one_hot_index(target: &[u8]) -> Result<usize, ModelError> {
    let mut hits = target.iter().enumerate().filter(|(_, &t)| t == 1);
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Ok(i),
        (None, _) => Err(ModelError::EmptyTarget),
        _ => Err(ModelError::Length("location target is not one-hot")),
    }
}

/// `-log p[target]` with `p` floored at [`LOG_FLOOR`].
pub fn loss_loc<'t>(loc: Var<'t>, target: &[u8]) -> Result<Var<'t>, ModelError> {
    if loc.shape()[0] != target.len() {
        return Err(ModelError::Length("location distribution and target"));
    }
    let idx = one_hot_index(target)?;
    Ok(loc.select(idx)?.ln_clamped(LOG_FLOOR).scale(-1.0))
}

pub fn loss_rep<'t>(
    tape: &'t Tape,
    rep: Var<'t>,
    target: &[u8],
    mode: RepLossMode,
) -> Result<Var<'t>, ModelError> {
    let n = rep.shape()[0];
    if n != target.len() {
        return Err(ModelError::Length("repair distribution and target"));
    }
    if !target.contains(&1) {
        return Err(ModelError::EmptyTarget);
    }
    let weights = || {
        let data = target.iter().map(|&t| f64::from(t)).collect();
        tape.constant(Tensor::new(n, 1, data).expect("sized"))
    };
    let loss = match mode {
        RepLossMode::SumProb => rep.mul(weights())?.sum().ln_clamped(LOG_FLOOR),
        RepLossMode::SumLog => rep.ln_clamped(LOG_FLOOR).mul(weights())?.sum(),
        RepLossMode::MaxProb => {
            let probs = rep.value();
            let mut best = None;
            for (i, &t) in target.iter().enumerate() {
                if t == 1 && best.is_none_or(|b: usize| probs.data()[i] > probs.data()[b]) {
                    best = Some(i);
                }
            }
            rep.select(best.expect("nonempty"))?.ln_clamped(LOG_FLOOR)
        }
    };
    Ok(loss.scale(-1.0))
}

fn mask_of(mask: &[u8]) -> Vec<bool> {
    mask.iter().map(|&m| m == 1).collect()
}

/// Location loss, plus the repair loss for buggy examples.
pub fn joint_loss<'t>(
    tape: &'t Tape,
    p: &ParamVars<'t>,
    cfg: &ModelConfig,
    ex: &Example,
) -> Result<Var<'t>, ModelError> {
    check_ids(cfg, &ex.token_ids)?;
    let (states, hn) = encode_sequence(tape, p, &ex.token_ids)?;
    let out = pointer_heads(p, states, hn, &mask_of(&ex.mask), cfg.mask_mode)?;
    let loc = loss_loc(out.loc, &ex.loc_target)?;
    if ex.is_buggy {
        Ok(loc.add(loss_rep(tape, out.rep, &ex.rep_target, cfg.rep_loss_mode)?)?)
    } else {
        Ok(loc)
    }
}

/// Repair loss of the repair-only model on a hole example.
pub fn repair_loss<'t>(
    tape: &'t Tape,
    p: &ParamVars<'t>,
    cfg: &ModelConfig,
    ex: &HoleExample,
) -> Result<Var<'t>, ModelError> {
    check_ids(cfg, &ex.token_ids)?;
    let (states, hn) = encode_sequence(tape, p, &ex.token_ids)?;
    let rep = repair_head(p, states, hn, &mask_of(&ex.mask), cfg.mask_mode)?;
    loss_rep(tape, rep, &ex.rep_target, cfg.rep_loss_mode)
}

/// Inference-only forward pass of the joint model.
pub fn predict_pointers(
    params: &ModelParams,
    cfg: &ModelConfig,
    token_ids: &[usize],
    mask: &[u8],
) -> Result<PointerOutput, ModelError> {
    check_ids(cfg, token_ids)?;
    let tape = Tape::new();
    let p = params.record(&tape, false);
    let (states, hn) = encode_sequence(&tape, &p, token_ids)?;
    let out = pointer_heads(&p, states, hn, &mask_of(mask), cfg.mask_mode)?;
    Ok(PointerOutput {
        loc_dist: out.loc.value().into_data(),
        rep_dist: out.rep.value().into_data(),
    })
}

/// Inference-only repair distribution of the repair-only model.
pub fn predict_repair(
    params: &ModelParams,
    cfg: &ModelConfig,
    ex: &HoleExample,
) -> Result<Vec<f64>, ModelError> {
    check_ids(cfg, &ex.token_ids)?;
    let tape = Tape::new();
    let p = params.record(&tape, false);
    let (states, hn) = encode_sequence(&tape, &p, &ex.token_ids)?;
    let rep = repair_head(&p, states, hn, &mask_of(&ex.mask), cfg.mask_mode)?;
    Ok(rep.value().into_data())
}
