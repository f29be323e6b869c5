use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::sha256_hex;
use super::HarnessError;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MANIFEST_SCHEMA: &str = "surface-hydro/manifest/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Complete,
}

/// Everything needed to reproduce a run and to check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub code_version: String,
    pub config_hash: String,
    pub status: RunStatus,
    /// Replicate `r` draws from ChaCha8 seeded with `master_seed` on stream `r`.
    pub master_seed: u64,
    pub replicate_streams: Vec<u64>,
    /// Conventions, tolerances and thresholds in effect.
    pub decisions: BTreeMap<String, String>,
    /// Output files (relative to the run directory) and their SHA-256.
    pub files: BTreeMap<String, String>,
}

/// Conventions every run shares.
pub fn standard_decisions() -> BTreeMap<String, String> {
    [
        (
            "w_convention",
            "w_i = z_{i-1} - 2 z_i + z_{i+1}, z_i = h_{i+1} - h_i (about +h_xxx)",
        ),
        (
            "site_positions",
            "storage index k holds site k+1 at x = (k+1)/N",
        ),
        ("time_scale", "t = s / N^4"),
        ("averaging_interval", "I_{t,Delta} = [t, t + Delta]"),
        (
            "pending_clock",
            "discarded at window boundaries (memoryless)",
        ),
        ("rng", "ChaCha8, stream per replicate"),
        ("reduction", "sequential merge in replicate order"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl RunManifest {
    /// Opens a run directory for a configuration.
    ///
    /// Writes `config.toml` and a manifest marked running before any long
    /// work starts. Refuses to touch a directory whose existing manifest was
    /// produced from a different configuration.
    pub fn begin(
        dir: &Path,
        command: &str,
        config_text: &str,
        master_seed: u64,
        replicates: u64,
    ) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let config_hash = sha256_hex(config_text.as_bytes());
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            let old = Self::load(dir)?;
            if old.config_hash != config_hash || old.command != command {
                return Err(HarnessError::RefuseOverwrite {
                    dir: dir.display().to_string(),
                    existing: format!("{} {}", old.command, old.config_hash),
                    requested: format!("{command} {config_hash}"),
                });
            }
        }
        std::fs::write(dir.join("config.toml"), config_text)?;
        let m = Self {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            status: RunStatus::Running,
            master_seed,
            replicate_streams: (0..replicates).collect(),
            decisions: standard_decisions(),
            files: BTreeMap::new(),
        };
        m.save(dir)?;
        Ok(m)
    }

    pub fn decide(&mut self, key: &str, value: impl ToString) {
        self.decisions.insert(key.into(), value.to_string());
    }

    /// Hashes an output file and adds it to the inventory.
    pub fn record_file(&mut self, dir: &Path, relative: &str) -> Result<(), HarnessError> {
        let bytes = std::fs::read(dir.join(relative))?;
        self.files.insert(relative.into(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn finish(&mut self, dir: &Path) -> Result<(), HarnessError> {
        self.status = RunStatus::Complete;
        self.save(dir)
    }

    pub fn save(&self, dir: &Path) -> Result<(), HarnessError> {
        let text = toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))?;
        // Write then rename so a crash never leaves a truncated manifest.
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(format!("manifest: {e}")))
    }

    /// Files whose current checksum differs from the inventory.
    pub fn verify_files(&self, dir: &Path) -> Result<Vec<String>, HarnessError> {
        let mut bad = Vec::new();
        for (name, sum) in &self.files {
            match std::fs::read(dir.join(name)) {
                Ok(bytes) if &sha256_hex(&bytes) == sum => {}
                _ => bad.push(name.clone()),
            }
        }
        Ok(bad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_differing_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::begin(dir.path(), "simulate", "a = 1\n", 7, 3).unwrap();
        std::fs::write(dir.path().join("out.csv"), "x\n1\n").unwrap();
        m.record_file(dir.path(), "out.csv").unwrap();
        m.finish(dir.path()).unwrap();
        let back = RunManifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.verify_files(dir.path()).unwrap().is_empty());
        // Same config may rerun, a different one may not.
        RunManifest::begin(dir.path(), "simulate", "a = 1\n", 7, 3).unwrap();
        let err = RunManifest::begin(dir.path(), "simulate", "a = 2\n", 7, 3).unwrap_err();
        assert!(matches!(err, HarnessError::RefuseOverwrite { .. }));
        std::fs::write(dir.path().join("out.csv"), "x\n2\n").unwrap();
        assert_eq!(
            back.verify_files(dir.path()).unwrap(),
            vec!["out.csv".to_string()]
        );
    }
}
