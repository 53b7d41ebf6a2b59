use std::path::Path;

use serde::{Deserialize, Serialize};
use whisker_core::seed;

use crate::error::{HarnessError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the output directory when the file lives inside it.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path, root: &Path) -> Result<Self> {
        let data = std::fs::read(path)
            .map_err(|e| HarnessError::Data(format!("cannot read {}: {e}", path.display())))?;
        let shown = path.strip_prefix(root).unwrap_or(path);
        Ok(Self {
            path: shown.to_string_lossy().replace('\\', "/"),
            sha256: seed::digest_hex(&data),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub command: String,
    pub config_digest: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub elapsed_ms: u64,
    /// Command-specific summary values.
    #[serde(default)]
    pub summary: serde_json::Value,
}

/// Record of what each command read and wrote in one output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            stages: Vec::new(),
        }
    }

    /// Load the manifest in `dir`, or start a fresh one.
    pub fn open(dir: &Path, seed: u64) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::new(seed));
        }
        let text = std::fs::read_to_string(&path)?;
        let mut m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Data(format!("corrupt manifest {}: {e}", path.display())))?;
        m.seed = seed;
        Ok(m)
    }

    /// Replace any earlier record of the same command, keeping command order.
    pub fn record(&mut self, stage: StageRecord) {
        match self.stages.iter_mut().find(|s| s.command == stage.command) {
            Some(slot) => *slot = stage,
            None => self.stages.push(stage),
        }
    }

    pub fn stage(&self, command: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.command == command)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(self)? + "\n",
        )?;
        Ok(())
    }

    /// Every output digest across stages, in order, ignoring timing.
    pub fn output_digests(&self) -> Vec<(String, String)> {
        self.stages
            .iter()
            .flat_map(|s| s.outputs.iter().map(|f| (f.path.clone(), f.sha256.clone())))
            .collect()
    }
}

/// Fail with a data error if `path` no longer matches the digest a previous
/// stage recorded for it.
pub fn verify(path: &Path, root: &Path, manifest: &RunManifest) -> Result<FileDigest> {
    let d = FileDigest::of(path, root)?;
    let recorded = manifest
        .stages
        .iter()
        .flat_map(|s| &s.outputs)
        .find(|f| f.path == d.path);
    if let Some(r) = recorded {
        if r.sha256 != d.sha256 {
            return Err(HarnessError::Data(format!(
                "{} does not match its recorded digest",
                path.display()
            )));
        }
    }
    Ok(d)
}
