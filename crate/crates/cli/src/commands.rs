use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use varmisuse_core::datagen::synth::{generate_corpus, SynthConfig};
use varmisuse_core::datagen::{
    build_vocab, generate_dataset, generate_hole_dataset, generate_noise_pairs, load_corpus,
    read_jsonl, write_jsonl, DatagenConfig, NoisePair,
};
use varmisuse_core::eval::{
    compute_metrics, decide_enumerative, evaluate_joint, metrics_csv, metrics_table, noise_csv,
    noise_table, predict_joint_with, run_noise_experiment, slot_predictions, Metrics, RepairOnly,
    SlotPrediction,
};
use varmisuse_core::model::predict_pointers;
use varmisuse_core::train::{model_card, train, write_log_csv, TrainData};
use varmisuse_core::{
    Checkpoint, Example, HoleExample, ModelConfig, ModelKind, Prediction, TrainConfig, Vocab,
};

use crate::args::{
    EnumEvalArgs, EvalArgs, GenCorpusArgs, GenDataArgs, InspectArgs, ModelArg, NoiseExpArgs,
    TrainArgs,
};
use crate::manifest::Run;

pub const VOCAB_FILE: &str = "vocab.json";
pub const DATAGEN_FILE: &str = "datagen.json";
pub const HOLES_TRAIN_FILE: &str = "holes_train.jsonl";
pub const HOLES_VALID_FILE: &str = "holes_valid.jsonl";
pub const NOISE_ANY_FILE: &str = "noise_any.jsonl";
pub const NOISE_NEAR_FILE: &str = "noise_near.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LAST_CHECKPOINT_FILE: &str = "last.bin";

fn read_config_file(path: Option<&Path>) -> Result<Value> {
    let Some(path) = path else {
        return Ok(Value::Null);
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if !v.is_object() {
        bail!("{}: expected a JSON object", path.display());
    }
    Ok(v)
}

/// `base` with the fields present in `section` of the config file replaced.
fn overlay<T: Serialize + DeserializeOwned>(base: T, file: &Value, section: &str) -> Result<T> {
    let Some(patch) = file.get(section) else {
        return Ok(base);
    };
    let Some(patch) = patch.as_object() else {
        bail!("config section {section:?} must be an object");
    };
    let mut v = serde_json::to_value(base)?;
    let obj = v.as_object_mut().expect("config types serialize to objects");
    for (k, x) in patch {
        if !obj.contains_key(k) {
            bail!("unknown key {k:?} in config section {section:?}");
        }
        if let (Some(dst), Some(src)) = (obj.get_mut(k).and_then(Value::as_object_mut), x.as_object()) {
            for (k2, x2) in src {
                dst.insert(k2.clone(), x2.clone());
            }
        } else {
            obj.insert(k.clone(), x.clone());
        }
    }
    serde_json::from_value(v).with_context(|| format!("config section {section:?}"))
}

fn read_vocab(data: &Path) -> Result<Vocab> {
    let path = data.join(VOCAB_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Vocab::from_json(&text)?)
}

fn read_partition<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(path).with_context(|| format!("reading {}", path.display()))
}

fn load_checkpoint(path: &Path, want: ModelKind) -> Result<Checkpoint> {
    let ckpt = Checkpoint::load(path, None)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    if ckpt.train_config.model != want {
        bail!(
            "{} holds a {:?} model; this command needs {:?}",
            path.display(),
            ckpt.train_config.model,
            want
        );
    }
    Ok(ckpt)
}

pub fn gen_corpus(a: &GenCorpusArgs) -> Result<()> {
    let mut run = Run::start("gen-corpus", &a.out)?;
    let cfg = SynthConfig::default();
    run.write("corpus.py", generate_corpus(&cfg, a.functions, a.seed))?;
    run.finish(json!({ "functions": a.functions, "synth": cfg }), Some(a.seed))?;
    Ok(())
}

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    let file = read_config_file(a.config.as_deref())?;
    let mut cfg = overlay(DatagenConfig::default(), &file, "datagen")?;
    if let Some(n) = a.max_tokens {
        cfg.max_tokens = n;
    }
    if let Some(n) = a.vocab_size {
        cfg.vocab_size = n;
    }
    if a.max_test_functions.is_some() {
        cfg.max_test_functions = a.max_test_functions;
    }
    cfg.validate()?;

    let mut run = Run::start("gen-data", &a.out)?;
    run.input(&a.corpus);
    let corpus = load_corpus(&a.corpus, a.pretokenized)
        .with_context(|| format!("loading corpus {}", a.corpus.display()))?;
    let vocab = build_vocab(&corpus, cfg.vocab_size)?;
    let ds = generate_dataset(&corpus, &vocab, &cfg, a.seed)?;
    let (holes_train, holes_valid) = generate_hole_dataset(&corpus, &vocab, &cfg)?;
    let noise = generate_noise_pairs(&corpus, &vocab, &cfg, a.seed)?;

    run.write(VOCAB_FILE, vocab.to_json())?;
    run.write(DATAGEN_FILE, serde_json::to_vec_pretty(&cfg)?)?;
    write_jsonl(&run.path("train.jsonl"), &ds.train)?;
    write_jsonl(&run.path("valid.jsonl"), &ds.valid)?;
    write_jsonl(&run.path("test.jsonl"), &ds.test)?;
    write_jsonl(&run.path(HOLES_TRAIN_FILE), &holes_train)?;
    write_jsonl(&run.path(HOLES_VALID_FILE), &holes_valid)?;
    write_jsonl(&run.path(NOISE_ANY_FILE), &noise.any)?;
    write_jsonl(&run.path(NOISE_NEAR_FILE), &noise.near)?;
    eprintln!(
        "{} functions, vocab {}, examples train/valid/test {}/{}/{}, holes {}/{}, noise any/near {}/{}",
        corpus.len(),
        vocab.len(),
        ds.train.len(),
        ds.valid.len(),
        ds.test.len(),
        holes_train.len(),
        holes_valid.len(),
        noise.any.len(),
        noise.near.len()
    );
    run.finish(
        json!({ "datagen": cfg, "pretokenized": a.pretokenized }),
        Some(a.seed),
    )?;
    Ok(())
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    let file = read_config_file(a.config.as_deref())?;
    let vocab = read_vocab(&a.data)?;
    let mut mc = overlay(ModelConfig::default(), &file, "model")?;
    mc.vocab_size = vocab.len();
    if let Some(v) = a.embed_dim {
        mc.embed_dim = v;
    }
    if let Some(v) = a.hidden_dim {
        mc.hidden_dim = v;
    }
    if let Some(v) = a.mask_mode {
        mc.mask_mode = v;
    }
    if let Some(v) = a.rep_loss {
        mc.rep_loss_mode = v;
    }
    if let Some(v) = a.max_tokens {
        mc.max_tokens = v;
    }
    let mut tc = overlay(TrainConfig::default(), &file, "train")?;
    tc.model = match a.model {
        ModelArg::Joint => ModelKind::Joint,
        ModelArg::Repair => ModelKind::RepairOnly,
    };
    if let Some(v) = a.seed {
        tc.seed = v;
    }
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.lr {
        tc.adam.lr = v;
    }
    if let Some(v) = a.eval_every {
        tc.eval_every = v;
    }
    if let Some(v) = a.patience {
        tc.early_stop_patience = v;
    }
    if a.time_budget.is_some() {
        tc.time_budget_secs = a.time_budget;
    }
    if a.target_metric.is_some() {
        tc.target_metric = a.target_metric;
    }
    if a.lr_decay_to.is_some() {
        tc.lr_decay_to = a.lr_decay_to;
    }

    let mut run = Run::start("train", &a.out)?;
    run.input(&a.data);
    let outcome = match tc.model {
        ModelKind::Joint => {
            let tr: Vec<Example> = read_partition(&a.data.join("train.jsonl"))?;
            let va: Vec<Example> = read_partition(&a.data.join("valid.jsonl"))?;
            train(TrainData::Joint { train: &tr, valid: &va }, &mc, &tc)?
        }
        ModelKind::RepairOnly => {
            let tr: Vec<HoleExample> = read_partition(&a.data.join(HOLES_TRAIN_FILE))?;
            let va: Vec<HoleExample> = read_partition(&a.data.join(HOLES_VALID_FILE))?;
            train(TrainData::Repair { train: &tr, valid: &va }, &mc, &tc)?
        }
    };
    outcome.best.save(&run.path(CHECKPOINT_FILE))?;
    outcome.last.save(&run.path(LAST_CHECKPOINT_FILE))?;
    write_log_csv(&run.path("train_log.csv"), &outcome.log)?;
    run.write("model_card.txt", model_card(&mc, tc.model, &vocab.hash()))?;
    eprintln!(
        "{} steps, best validation metric {}",
        outcome.last.step,
        outcome
            .best
            .best_valid_metric
            .map_or("n/a".to_string(), |m| format!("{m:.4}"))
    );
    run.finish(json!({ "model": mc, "train": tc }), Some(tc.seed))?;
    Ok(())
}

pub fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint, ModelKind::Joint)?;
    let name = a.partition.name();
    let examples: Vec<Example> = read_partition(&a.data.join(format!("{name}.jsonl")))?;
    let mut run = Run::start("eval", &a.out)?;
    run.input(&a.checkpoint);
    run.input(&a.data);
    let (metrics, preds) = match a.confidence {
        None => evaluate_joint(&ckpt.params, &ckpt.model_config, &examples)?,
        Some(theta) => {
            let preds = examples
                .iter()
                .map(|ex| predict_joint_with(&ckpt.params, &ckpt.model_config, ex, Some(theta)))
                .collect::<Result<Vec<Prediction>, _>>()?;
            (compute_metrics(&preds, &examples)?, preds)
        }
    };
    let rows = vec![(format!("joint ({name})"), metrics)];
    let table = metrics_table(&rows);
    print!("{table}");
    run.write("metrics.txt", &table)?;
    run.write("metrics.csv", metrics_csv(&rows))?;
    run.write("metrics.json", serde_json::to_vec_pretty(&metrics)?)?;
    write_jsonl(&run.path("predictions.jsonl"), &preds)?;
    run.finish(
        json!({ "partition": name, "confidence": a.confidence, "model": ckpt.model_config }),
        None,
    )?;
    Ok(())
}

/// Header printed above every enumerative grid.
pub const ENUM_NOTE: &str = "# enumerative baseline: tau filters slot predictions by probability, \
k keeps the k most confident; rows with finite k and tau=0 are the plain top-k rows";

pub fn enum_eval(a: &EnumEvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint, ModelKind::RepairOnly)?;
    let name = a.partition.name();
    let examples: Vec<Example> = read_partition(&a.data.join(format!("{name}.jsonl")))?;
    let mut run = Run::start("enum-eval", &a.out)?;
    run.input(&a.checkpoint);
    run.input(&a.data);
    let model = RepairOnly {
        params: &ckpt.params,
        cfg: &ckpt.model_config,
    };
    let slots = examples
        .iter()
        .map(|ex| slot_predictions(&model, ex))
        .collect::<Result<Vec<Vec<SlotPrediction>>, _>>()?;
    let mut rows: Vec<(String, Metrics)> = Vec::new();
    for &k in &a.k {
        for &tau in &a.tau {
            let preds: Vec<Prediction> =
                slots.iter().map(|s| decide_enumerative(s, tau, k.0)).collect();
            rows.push((format!("tau={tau} k={k}"), compute_metrics(&preds, &examples)?));
        }
    }
    let table = format!("{ENUM_NOTE}\n{}", metrics_table(&rows));
    print!("{table}");
    run.write("enum_metrics.txt", &table)?;
    run.write("enum_metrics.csv", format!("{ENUM_NOTE}\n{}", metrics_csv(&rows)))?;
    run.finish(
        json!({
            "partition": name,
            "tau": a.tau,
            "k": a.k.iter().map(|k| k.to_string()).collect::<Vec<_>>(),
            "model": ckpt.model_config,
        }),
        None,
    )?;
    Ok(())
}

pub fn noise_exp(a: &NoiseExpArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint, ModelKind::RepairOnly)?;
    let any: Vec<NoisePair> = read_partition(&a.data.join(NOISE_ANY_FILE))?;
    let near: Vec<NoisePair> = read_partition(&a.data.join(NOISE_NEAR_FILE))?;
    let mut run = Run::start("noise-exp", &a.out)?;
    run.input(&a.checkpoint);
    run.input(&a.data);
    let model = RepairOnly {
        params: &ckpt.params,
        cfg: &ckpt.model_config,
    };
    let any_rows = run_noise_experiment(&model, &any, &a.tau)?;
    let near_rows = run_noise_experiment(&model, &near, &a.tau)?;
    let text = format!(
        "{}\n{}",
        noise_table(&format!("NoBugAny vs AddBugAny ({} pairs)", any.len()), &any_rows),
        noise_table(&format!("NoBugNear vs AddBugNear ({} pairs)", near.len()), &near_rows)
    );
    print!("{text}");
    run.write("noise.txt", &text)?;
    run.write("noise_any.csv", noise_csv(&any_rows))?;
    run.write("noise_near.csv", noise_csv(&near_rows))?;
    run.finish(json!({ "tau": a.tau, "model": ckpt.model_config }), None)?;
    Ok(())
}

pub fn inspect(a: &InspectArgs) -> Result<()> {
    let name = a.partition.name();
    let examples: Vec<Example> = read_partition(&a.data.join(format!("{name}.jsonl")))?;
    let Some(ex) = examples.get(a.index) else {
        bail!("{name} has {} examples; index {} is out of range", examples.len(), a.index);
    };
    let ckpt = a
        .checkpoint
        .as_deref()
        .map(|p| Checkpoint::load(p, None).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    print!("{}", render_example(ex, ckpt.as_ref())?);
    Ok(())
}

fn render_example(ex: &Example, ckpt: Option<&Checkpoint>) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "function: {}", ex.function_id)?;
    if ex.is_buggy {
        writeln!(
            out,
            "buggy at {}: {} should be {}",
            ex.bug_index.unwrap_or(0),
            ex.injected_var.as_deref().unwrap_or("?"),
            ex.original_var.as_deref().unwrap_or("?")
        )?;
    } else {
        writeln!(out, "bug-free")?;
    }
    let joint = ckpt.filter(|c| c.train_config.model == ModelKind::Joint);
    let dists = joint
        .map(|c| predict_pointers(&c.params, &c.model_config, &ex.token_ids, &ex.mask))
        .transpose()?;
    write!(out, "{:>4}  {:<20} {:>4} {:>3} {:>3}", "pos", "token", "mask", "loc", "rep")?;
    if dists.is_some() {
        write!(out, "  {:>7}  {:>7}", "p(loc)", "p(rep)")?;
    }
    writeln!(out)?;
    for i in 0..ex.len() {
        write!(
            out,
            "{:>4}  {:<20} {:>4} {:>3} {:>3}",
            i, ex.raw_tokens[i], ex.mask[i], ex.loc_target[i], ex.rep_target[i]
        )?;
        if let Some(d) = &dists {
            write!(out, "  {:>7.4}  {:>7.4}", d.loc_dist[i], d.rep_dist[i])?;
        }
        writeln!(out)?;
    }
    if let Some(c) = joint {
        let p = predict_joint_with(&c.params, &c.model_config, ex, None)?;
        writeln!(out, "prediction: {}", serde_json::to_string(&p.verdict)?)?;
    }
    if let Some(c) = ckpt.filter(|c| c.train_config.model == ModelKind::RepairOnly) {
        let model = RepairOnly {
            params: &c.params,
            cfg: &c.model_config,
        };
        writeln!(out, "slot repairs:")?;
        for s in slot_predictions(&model, ex)? {
            writeln!(
                out,
                "{:>4}  {} -> {} ({:.4}){}",
                s.slot_index,
                s.original,
                s.predicted,
                s.prob,
                if s.modifies() { "  *" } else { "" }
            )?;
        }
    }
    Ok(out)
}
