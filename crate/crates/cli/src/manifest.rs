//! Run-directory bookkeeping: stage manifest, input digests, and the lock.
//!
//! Every command operates inside one run directory. The manifest records,
//! per stage, the exact configuration used, digests of the files read, the
//! files written, and the seed, so a finished stage can be recognized and
//! skipped and every artifact traced back to the invocation that made it.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{ErrorKind, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";

/// What one stage ran with and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub completed: bool,
    /// Full flag snapshot for the stage, as passed on the command line.
    pub config: serde_json::Value,
    /// Input path (run-relative where possible) -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    /// Paths written, relative to the run directory unless `--out` pointed
    /// elsewhere.
    pub outputs: Vec<String>,
    pub seed: u64,
}

impl StageRecord {
    /// True when `other` completed with the same config, inputs, and seed.
    fn matches(&self, other: &StageRecord) -> bool {
        other.completed
            && self.config == other.config
            && self.inputs == other.inputs
            && self.seed == other.seed
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    /// Read the manifest, or start empty for a fresh run directory.
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .with_context(|| format!("corrupt manifest at {}", path.display())),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(RunManifest::default()),
            Err(e) => Err(e).with_context(|| format!("cannot read {}", path.display())),
        }
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).context("serialize manifest")?;
        fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn completed(&self, stage: &str) -> bool {
        self.stages.get(stage).is_some_and(|s| s.completed)
    }

    /// Dependency gate: fail with the prerequisite command's name.
    pub fn require(&self, stage: &str) -> Result<()> {
        if self.completed(stage) {
            Ok(())
        } else {
            bail!("missing prerequisite stage `{stage}`; run `adoptvec {stage}` on this run directory first");
        }
    }

    /// A stage is current when the manifest shows the same record completed
    /// and everything it wrote is still on disk.
    pub fn is_current(&self, run_dir: &Path, stage: &str, candidate: &StageRecord) -> bool {
        let Some(existing) = self.stages.get(stage) else {
            return false;
        };
        candidate.matches(existing)
            && existing
                .outputs
                .iter()
                .all(|o| resolve(run_dir, o).exists())
    }

    pub fn record(&mut self, stage: &str, record: StageRecord) {
        self.stages.insert(stage.to_string(), record);
    }
}

fn resolve(run_dir: &Path, recorded: &str) -> PathBuf {
    let p = Path::new(recorded);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        run_dir.join(p)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file =
        File::open(path).with_context(|| format!("cannot open {} for hashing", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file
            .read(&mut buf)
            .with_context(|| format!("read {}", path.display()))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Exclusive hold on a run directory for the lifetime of one command.
///
/// Creation fails if the lock file already exists; the file is removed on
/// drop, including on panic unwind. A crash that skips unwinding leaves the
/// file behind, so the error says how to recover.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    pub fn acquire(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => bail!(
                "run directory is in use (lock file {} exists); if no other command is running, delete it",
                path.display()
            ),
            Err(e) => Err(e).with_context(|| format!("cannot create lock {}", path.display())),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
