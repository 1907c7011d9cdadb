//! Artifact plumbing: atomic file writes and per-file JSON sidecars
//! carrying the config hash and the precision actually used.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub struct ArtifactSink {
    dir: PathBuf,
    config_sha256: String,
    command: String,
}

impl ArtifactSink {
    pub fn new(dir: &Path, config_bytes: &[u8], command: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        Ok(Self {
            dir: dir.to_path_buf(),
            config_sha256: format!("{:x}", hasher.finalize()),
            command: command.to_string(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write `name` atomically (temp file in the same directory, then
    /// rename) together with `<name>.meta.json` recording the command,
    /// the config hash, and caller-supplied certificates.
    pub fn write(&self, name: &str, bytes: &[u8], meta: Value) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        let sidecar = serde_json::json!({
            "artifact": name,
            "command": self.command,
            "config_sha256": self.config_sha256,
            "details": meta,
        });
        let meta_path = self.dir.join(format!("{name}.meta.json"));
        write_atomic(&meta_path, &pretty(&sidecar))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &Value, meta: Value) -> Result<PathBuf> {
        self.write(name, &pretty(value), meta)
    }
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("JSON serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().context("artifact path has no parent directory")?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .with_context(|| format!("cannot move artifact into place at {}", path.display()))?;
    Ok(())
}
