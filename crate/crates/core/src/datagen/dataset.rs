use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::example::{
    encode_example, encode_hole, make_bugfree, make_buggy, make_hole_variant, Example,
    HoleExample,
};
use super::noise::{inject_noise, NoiseMode, NoisePair};
use super::vocab::Vocab;
use super::{DatagenConfig, DatagenError};
use crate::frontend::{extract_functions, read_pretokenized, tokenize, FunctionSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Valid,
    Test,
}

/// Joint-model examples by partition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
}

/// Clean/noisy hole pairs for the slot-placement experiment.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSet {
    pub any: Vec<NoisePair>,
    pub near: Vec<NoisePair>,
}

fn hash_bytes(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Assigns a function to a partition from a hash of its id alone, so the
/// assignment does not depend on corpus order or seed.
pub fn partition_of(function_id: &str, cfg: &DatagenConfig) -> Partition {
    let digest = hash_bytes(&[b"partition", function_id.as_bytes()]);
    let x = u64::from_le_bytes(digest[..8].try_into().unwrap());
    let u = (x >> 11) as f64 / (1u64 << 53) as f64;
    if u < cfg.train_fraction {
        Partition::Train
    } else if u < cfg.train_fraction + cfg.valid_fraction {
        Partition::Valid
    } else {
        Partition::Test
    }
}

/// Independent generator for one function and one purpose.
pub fn function_rng(seed: u64, tag: &str, function_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(hash_bytes(&[
        &seed.to_le_bytes(),
        tag.as_bytes(),
        function_id.as_bytes(),
    ]))
}

fn collect_files(root: &Path, ext: &str, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if root.is_file() {
        out.push(root.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(root)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, ext, out)?;
        } else if p.extension().is_some_and(|e| e == ext) {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads every `.py` file (or `.jsonl` pre-tokenized file) under `root` in
/// sorted path order. Function ids are prefixed by the file's relative path
/// and duplicate functions across files are dropped.
pub fn load_corpus(root: &Path, pretokenized: bool) -> Result<Vec<FunctionSource>, DatagenError> {
    let ext = if pretokenized { "jsonl" } else { "py" };
    let mut files = Vec::new();
    collect_files(root, ext, &mut files)?;
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut corpus = Vec::new();
    for path in files {
        let rel = path
            .strip_prefix(root)
            .ok()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(&path)
            .to_string_lossy()
            .replace('\\', "/");
        let tokens = if pretokenized {
            read_pretokenized(&path).map_err(|source| DatagenError::Parse {
                path: rel.clone(),
                source,
            })?
        } else {
            let text = fs::read_to_string(&path)?;
            tokenize(&text).map_err(|source| DatagenError::Lex {
                path: rel.clone(),
                source,
            })?
        };
        let functions = extract_functions(&tokens).map_err(|source| DatagenError::Parse {
            path: rel.clone(),
            source,
        })?;
        for mut f in functions {
            if seen.insert(f.texts()) {
                f.id = format!("{rel}:{}", f.id);
                corpus.push(f);
            }
        }
    }
    Ok(corpus)
}

fn split<'a>(
    corpus: &'a [FunctionSource],
    cfg: &DatagenConfig,
) -> Result<[Vec<&'a FunctionSource>; 3], DatagenError> {
    cfg.validate()?;
    if corpus.iter().all(|f| f.tokens.is_empty()) {
        return Err(DatagenError::EmptyCorpus);
    }
    let mut parts: [Vec<&FunctionSource>; 3] = Default::default();
    for f in corpus.iter().filter(|f| !f.slots.is_empty()) {
        let i = match partition_of(&f.id, cfg) {
            Partition::Train => 0,
            Partition::Valid => 1,
            Partition::Test => 2,
        };
        parts[i].push(f);
    }
    if let Some(cap) = cfg.max_test_functions {
        parts[2].truncate(cap);
    }
    Ok(parts)
}

fn pair_for_slot(
    f: &FunctionSource,
    rank: usize,
    vocab: &Vocab,
    cfg: &DatagenConfig,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Example>,
) -> Result<(), DatagenError> {
    let buggy = make_buggy(f, &f.slots[rank], rng)?;
    let clean = make_bugfree(f);
    if let (Some(b), Some(c)) = (buggy.truncate(cfg.max_tokens), clean.truncate(cfg.max_tokens)) {
        out.push(encode_example(b, vocab));
        out.push(encode_example(c, vocab));
    }
    Ok(())
}

/// Train and valid get a buggy and a bug-free example per slot; test gets
/// one pair per function at a randomly chosen slot. Pairs are dropped
/// together when truncation would lose the bug or its repair.
pub fn generate_dataset(
    corpus: &[FunctionSource],
    vocab: &Vocab,
    cfg: &DatagenConfig,
    seed: u64,
) -> Result<Dataset, DatagenError> {
    let [train_fns, valid_fns, test_fns] = split(corpus, cfg)?;
    let mut ds = Dataset::default();
    for (fns, out) in [(&train_fns, &mut ds.train), (&valid_fns, &mut ds.valid)] {
        for f in fns {
            let mut rng = function_rng(seed, "bug", &f.id);
            for rank in 0..f.slots.len() {
                pair_for_slot(f, rank, vocab, cfg, &mut rng, out)?;
            }
        }
    }
    for f in &test_fns {
        let mut rng = function_rng(seed, "bug", &f.id);
        let rank = rng.gen_range(0..f.slots.len());
        pair_for_slot(f, rank, vocab, cfg, &mut rng, &mut ds.test)?;
    }
    Ok(ds)
}

/// One hole example per slot for the train and valid functions.
pub fn generate_hole_dataset(
    corpus: &[FunctionSource],
    vocab: &Vocab,
    cfg: &DatagenConfig,
) -> Result<(Vec<HoleExample>, Vec<HoleExample>), DatagenError> {
    let [train_fns, valid_fns, _] = split(corpus, cfg)?;
    let build = |fns: &[&FunctionSource]| -> Result<Vec<HoleExample>, DatagenError> {
        let mut out = Vec::new();
        for f in fns {
            for slot in &f.slots {
                if let Some(h) = make_hole_variant(f, slot)?.truncate(cfg.max_tokens) {
                    out.push(encode_hole(h, vocab));
                }
            }
        }
        Ok(out)
    };
    Ok((build(&train_fns)?, build(&valid_fns)?))
}

/// Noise pairs over the test functions. Each function contributes at most
/// one pair per mode, both built around the same randomly chosen slot;
/// functions without an eligible location are skipped for that mode.
pub fn generate_noise_pairs(
    corpus: &[FunctionSource],
    vocab: &Vocab,
    cfg: &DatagenConfig,
    seed: u64,
) -> Result<NoiseSet, DatagenError> {
    let [_, _, test_fns] = split(corpus, cfg)?;
    let mut set = NoiseSet::default();
    for f in &test_fns {
        let mut rng = function_rng(seed, "noise", &f.id);
        let rank = rng.gen_range(0..f.slots.len());
        for (mode, out) in [(NoiseMode::Any, &mut set.any), (NoiseMode::Near, &mut set.near)] {
            let pair = match inject_noise(f, rank, mode, &mut rng, cfg) {
                Ok(p) => p,
                Err(DatagenError::NoEligibleLocation { .. }) => continue,
                Err(e) => return Err(e),
            };
            let clean = pair.clean.truncate(cfg.max_tokens);
            let noisy = pair.noisy.truncate(cfg.max_tokens);
            if let (Some(c), Some(n)) = (clean, noisy) {
                out.push(NoisePair {
                    clean: encode_hole(c, vocab),
                    noisy: encode_hole(n, vocab),
                });
            }
        }
    }
    Ok(set)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatagenError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatagenError> {
    let r = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::synth::{generate_corpus, SynthConfig};
    use crate::datagen::vocab::build_vocab;

    fn corpus(n: usize) -> Vec<FunctionSource> {
        let text = generate_corpus(&SynthConfig::default(), n, 3);
        let mut fns = extract_functions(&tokenize(&text).unwrap()).unwrap();
        for f in &mut fns {
            f.id = format!("toy.py:{}", f.id);
        }
        fns
    }

    #[test]
    fn balance_and_disjointness() {
        let fns = corpus(120);
        let vocab = build_vocab(&fns, 500).unwrap();
        let cfg = DatagenConfig::default();
        let ds = generate_dataset(&fns, &vocab, &cfg, 11).unwrap();
        assert!(!ds.train.is_empty() && !ds.test.is_empty());
        for part in [&ds.train, &ds.valid, &ds.test] {
            let buggy = part.iter().filter(|e| e.is_buggy).count();
            assert_eq!(2 * buggy, part.len());
        }
        let ids = |p: &[Example]| p.iter().map(|e| e.function_id.clone()).collect::<HashSet<_>>();
        let (a, b, c) = (ids(&ds.train), ids(&ds.valid), ids(&ds.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        // One pair per test function.
        assert_eq!(ds.test.len(), 2 * c.len());
    }

    #[test]
    fn deterministic_for_seed() {
        let fns = corpus(40);
        let vocab = build_vocab(&fns, 500).unwrap();
        let cfg = DatagenConfig::default();
        let a = generate_dataset(&fns, &vocab, &cfg, 5).unwrap();
        let b = generate_dataset(&fns, &vocab, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let n1 = generate_noise_pairs(&fns, &vocab, &cfg, 5).unwrap();
        let n2 = generate_noise_pairs(&fns, &vocab, &cfg, 5).unwrap();
        assert_eq!(n1, n2);
    }

    #[test]
    fn train_has_pair_per_slot() {
        let fns = corpus(60);
        let vocab = build_vocab(&fns, 500).unwrap();
        let cfg = DatagenConfig {
            max_tokens: 10_000,
            ..DatagenConfig::default()
        };
        let ds = generate_dataset(&fns, &vocab, &cfg, 1).unwrap();
        let slots: usize = fns
            .iter()
            .filter(|f| partition_of(&f.id, &cfg) == Partition::Train)
            .map(|f| f.slots.len())
            .sum();
        assert_eq!(ds.train.len(), 2 * slots);
        let (holes, _) = generate_hole_dataset(&fns, &vocab, &cfg).unwrap();
        assert_eq!(holes.len(), slots);
    }

    #[test]
    fn truncation_keeps_balance() {
        let fns = corpus(60);
        let vocab = build_vocab(&fns, 500).unwrap();
        let cfg = DatagenConfig {
            max_tokens: 25,
            ..DatagenConfig::default()
        };
        let ds = generate_dataset(&fns, &vocab, &cfg, 1).unwrap();
        assert_eq!(2 * ds.train.iter().filter(|e| e.is_buggy).count(), ds.train.len());
        assert!(ds.train.iter().all(|e| e.len() <= 25));
    }

    #[test]
    fn config_errors() {
        let fns = corpus(5);
        let vocab = build_vocab(&fns, 500).unwrap();
        let cfg = DatagenConfig {
            train_fraction: 0.5,
            ..DatagenConfig::default()
        };
        assert!(matches!(
            generate_dataset(&fns, &vocab, &cfg, 0),
            Err(DatagenError::Config(_))
        ));
        assert!(matches!(
            generate_dataset(&[], &vocab, &DatagenConfig::default(), 0),
            Err(DatagenError::EmptyCorpus)
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let fns = corpus(20);
        let vocab = build_vocab(&fns, 500).unwrap();
        let ds = generate_dataset(&fns, &vocab, &DatagenConfig::default(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("train.jsonl");
        write_jsonl(&p, &ds.train).unwrap();
        let back: Vec<Example> = read_jsonl(&p).unwrap();
        assert_eq!(back, ds.train);
    }

    #[test]
    fn load_corpus_prefixes_and_dedupes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.py"), "def f(a, b):\n  return a + b\n").unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(
            dir.path().join("sub/b.py"),
            "def f(a, b):\n  return a + b\n\ndef g(x, y):\n  return y\n",
        )
        .unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let fns = load_corpus(dir.path(), false).unwrap();
        let ids: Vec<&str> = fns.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, vec!["a.py:f@0", "sub/b.py:g@16"]);
        fs::write(dir.path().join("bad.py"), "def f(a):\n  return 'x\n").unwrap();
        assert!(matches!(load_corpus(dir.path(), false), Err(DatagenError::Lex { .. })));
    }
}
