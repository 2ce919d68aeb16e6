//! Artifact writing, checksums and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fail::Failure;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: Option<u64>,
    pub config_hash: String,
    /// Relative path to SHA-256.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Option<Self>, Failure> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Failure::runtime(format!("unreadable manifest {}: {e}", path.display())))
    }

    /// Files whose current checksum differs from the recorded one.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        let mut bad = Vec::new();
        for stage in self.stages.values() {
            for (rel, sum) in &stage.files {
                match fs::read(dir.join(rel)) {
                    Ok(bytes) if &sha256_hex(&bytes) == sum => {}
                    _ => bad.push(rel.clone()),
                }
            }
        }
        bad.sort();
        bad.dedup();
        bad
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files written by a command; removed again if it fails. The manifest is
/// only rewritten by [`Outputs::finish`].
pub struct Outputs {
    dir: PathBuf,
    written: Vec<(String, String)>,
    stage_start: usize,
    created_dirs: Vec<PathBuf>,
    manifest: Manifest,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        let mut created_dirs = Vec::new();
        if !dir.exists() {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::config_flag("--out", format!("cannot create {}: {e}", dir.display())))?;
            created_dirs.push(dir.to_path_buf());
        }
        let manifest = Manifest::read(dir)?.unwrap_or_default();
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new(), stage_start: 0, created_dirs, manifest })
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            if !parent.exists() {
                fs::create_dir_all(parent)?;
                self.created_dirs.push(parent.to_path_buf());
            }
        }
        fs::write(&path, bytes)?;
        self.written.push((rel.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Renders into memory with `f`, then writes.
    pub fn write_with<F>(&mut self, rel: &str, f: F) -> Result<(), Failure>
    where
        F: FnOnce(&mut Vec<u8>) -> pitchaudit::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    /// Assigns the files written since the previous stage to `stage`.
    pub fn stage(&mut self, stage: &str, seed: Option<u64>, config_hash: &str) {
        let files = self.written[self.stage_start..].iter().cloned().collect();
        self.stage_start = self.written.len();
        self.manifest
            .stages
            .insert(stage.to_string(), StageRecord { seed, config_hash: config_hash.to_string(), files });
    }

    pub fn finish(self) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(())
    }

    /// Deletes everything written by this command.
    pub fn abort(self) {
        for (rel, _) in &self.written {
            let _ = fs::remove_file(self.dir.join(rel));
        }
        for d in self.created_dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}
