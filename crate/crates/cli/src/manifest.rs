use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of one run: what it read, what it wrote and with which settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub out_dir: String,
    /// File name inside `out_dir` to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    pub duration_secs: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects artifacts written under one output directory.
pub struct Run {
    subcommand: &'static str,
    out: PathBuf,
    started: Instant,
    inputs: Vec<String>,
    artifacts: Vec<String>,
}

impl Run {
    pub fn start(subcommand: &'static str, out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            subcommand,
            out: out.to_path_buf(),
            started: Instant::now(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    /// Path of an artifact inside the output directory.
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.artifacts.iter().any(|a| a == name) {
            self.artifacts.push(name.to_string());
        }
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    /// Hashes every artifact and writes the manifest through a temporary
    /// file and a rename.
    pub fn finish(self, config: serde_json::Value, seed: Option<u64>) -> Result<RunManifest> {
        let mut artifacts = BTreeMap::new();
        for name in &self.artifacts {
            artifacts.insert(name.clone(), sha256_file(&self.out.join(name))?);
        }
        let manifest = RunManifest {
            subcommand: self.subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed,
            inputs: self.inputs,
            out_dir: self.out.display().to_string(),
            artifacts,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let tmp = self.out.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&manifest)?)
            .with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, self.out.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_match_written_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = Run::start("test", dir.path()).unwrap();
        run.write("a.txt", "alpha").unwrap();
        run.write("b.txt", "beta").unwrap();
        let m = run.finish(serde_json::json!({"x": 1}), Some(3)).unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(
            m.artifacts["a.txt"],
            "8ed3f6ad685b959ead7022518e1af76cd816f8e8ec7ccdda1ed4018e8f2223f8"
        );
        let back: RunManifest =
            serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(!dir.path().join("manifest.json.tmp").exists());
    }
}
