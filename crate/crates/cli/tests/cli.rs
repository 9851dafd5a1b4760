use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn varmisuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varmisuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = varmisuse(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// File name to SHA-256 for every file in a directory.
fn digests(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, hex::encode(Sha256::digest(fs::read(&p).unwrap())))
        })
        .collect()
}

fn without_manifest(mut d: BTreeMap<String, String>) -> BTreeMap<String, String> {
    d.remove("manifest.json");
    d
}

#[test]
fn usage_errors_exit_one_with_synopsis() {
    let out = varmisuse(&["eval", "--data", "d", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--checkpoint") && err.contains("Usage"), "{err}");

    assert_eq!(varmisuse(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(varmisuse(&[]).status.code(), Some(1));
    let bad_k = varmisuse(&["enum-eval", "--checkpoint", "c", "--data", "d", "--out", "o", "--k", "0"]);
    assert_eq!(bad_k.status.code(), Some(1));
    assert_eq!(varmisuse(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = varmisuse(&[
        "gen-data",
        "--corpus",
        p(&dir.path().join("missing")),
        "--out",
        p(&dir.path().join("data")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = varmisuse(&[
        "eval",
        "--checkpoint",
        p(&dir.path().join("nope.bin")),
        "--data",
        p(dir.path()),
        "--out",
        p(&dir.path().join("ev")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["gen-corpus", "--out", p(&corpus), "--functions", "120", "--seed", "7"]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&["gen-data", "--corpus", p(&corpus), "--seed", "7", "--out", p(out)]);
    }
    let (da, db) = (digests(&a), digests(&b));
    assert!(da.contains_key("train.jsonl") && da.contains_key("noise_near.jsonl"));
    assert_eq!(without_manifest(da.clone()), without_manifest(db));

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "gen-data");
    assert_eq!(manifest["seed"], 7);
    for (name, hash) in manifest["artifacts"].as_object().unwrap() {
        assert_eq!(&da[name], hash.as_str().unwrap(), "{name}");
    }

    let c = dir.path().join("c");
    ok(&["gen-data", "--corpus", p(&corpus), "--seed", "8", "--out", p(&c)]);
    assert_ne!(digests(&c)["train.jsonl"], da["train.jsonl"]);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    ok(&["gen-corpus", "--out", p(&corpus), "--functions", "40"]);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"datagen": {"max_tokens": 40, "vocab_size": 30}}"#).unwrap();
    let data = dir.path().join("data");
    ok(&[
        "gen-data", "--corpus", p(&corpus), "--out", p(&data), "--config", p(&cfg),
        "--vocab-size", "50",
    ]);
    let used: serde_json::Value =
        serde_json::from_slice(&fs::read(data.join("datagen.json")).unwrap()).unwrap();
    assert_eq!(used["max_tokens"], 40);
    assert_eq!(used["vocab_size"], 50);

    fs::write(&cfg, r#"{"datagen": {"max_tokenz": 40}}"#).unwrap();
    let out = varmisuse(&["gen-data", "--corpus", p(&corpus), "--out", p(&data), "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let data = dir.path().join("data");
    ok(&["gen-corpus", "--out", p(&corpus), "--functions", "80", "--seed", "3"]);
    ok(&["gen-data", "--corpus", p(&corpus), "--seed", "3", "--out", p(&data)]);
    let data_before = digests(&data);

    let train_flags = [
        "--epochs", "1", "--batch-size", "8", "--embed-dim", "8", "--hidden-dim", "12",
        "--eval-every", "20", "--seed", "5",
    ];
    let joint = dir.path().join("joint");
    let joint2 = dir.path().join("joint2");
    for out in [&joint, &joint2] {
        let mut args = vec!["train", "--data", p(&data), "--out", p(out), "--model", "joint"];
        args.extend(train_flags);
        ok(&args);
    }
    assert_eq!(without_manifest(digests(&joint)), without_manifest(digests(&joint2)));
    let log = fs::read_to_string(joint.join("train_log.csv")).unwrap();
    assert!(log.starts_with("step,epoch,train_loss,valid_loss,valid_metric\n"));
    assert!(fs::read_to_string(joint.join("model_card.txt")).unwrap().contains("hidden_dim (h): 12"));

    let repair = dir.path().join("repair");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&repair), "--model", "repair"];
    args.extend(train_flags);
    ok(&args);
    assert_eq!(digests(&data), data_before, "training wrote into the data directory");

    let ev = dir.path().join("eval");
    let table = ok(&[
        "eval", "--checkpoint", p(&joint.join("checkpoint.bin")), "--data", p(&data), "--out", p(&ev),
    ]);
    assert!(table.contains("loc+repair"));
    let again = ok(&[
        "eval", "--checkpoint", p(&joint.join("checkpoint.bin")), "--data", p(&data), "--out", p(&ev),
    ]);
    assert_eq!(table, again);

    let wrong = varmisuse(&[
        "enum-eval", "--checkpoint", p(&joint.join("checkpoint.bin")), "--data", p(&data), "--out",
        p(&dir.path().join("x")),
    ]);
    assert_eq!(wrong.status.code(), Some(2));

    let en = dir.path().join("enum");
    let grid = ok(&[
        "enum-eval", "--checkpoint", p(&repair.join("checkpoint.bin")), "--data", p(&data),
        "--out", p(&en), "--tau", "0,0.2,0.5", "--k", "1,inf",
    ]);
    assert_eq!(grid.lines().filter(|l| l.starts_with("tau=")).count(), 6);
    assert!(grid.starts_with('#'));
    let csv = fs::read_to_string(en.join("enum_metrics.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("tau=")).count(), 6);

    let nx = dir.path().join("noise");
    let noise = ok(&[
        "noise-exp", "--checkpoint", p(&repair.join("checkpoint.bin")), "--data", p(&data),
        "--out", p(&nx), "--tau", "0,0.5",
    ]);
    assert!(noise.contains("AddBugNear"));
    assert_eq!(fs::read_to_string(nx.join("noise_any.csv")).unwrap().lines().count(), 3);

    let shown = ok(&[
        "inspect", "--data", p(&data), "--index", "1", "--checkpoint",
        p(&joint.join("checkpoint.bin")),
    ]);
    assert!(shown.contains("p(loc)") && shown.contains("prediction:"));
    let shown = ok(&[
        "inspect", "--data", p(&data), "--checkpoint", p(&repair.join("checkpoint.bin")),
    ]);
    assert!(shown.contains("slot repairs:"));
    let out = varmisuse(&["inspect", "--data", p(&data), "--index", "100000"]);
    assert_eq!(out.status.code(), Some(2));
}
