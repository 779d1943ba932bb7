use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use hemfair::fair_model::{GridConfig, TrainConfig};
use hemfair::pipeline::HemConfig;
use hemfair::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything a run depends on besides its input files. A `--config` JSON
/// file overrides any subset of these defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fps: f64,
    pub embedding_dim: usize,
    pub hem: HemConfig,
    pub train: TrainConfig,
    pub grid: GridConfig,
    pub test_fraction: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fps: hemfair::corpus::DEFAULT_FPS,
            embedding_dim: hemfair::embeddings::EMBEDDING_DIM,
            hem: HemConfig::default(),
            train: TrainConfig::default(),
            grid: GridConfig::default(),
            test_fraction: 0.2,
            epsilon: 0.0,
            lambda: 0.0,
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
            }
        }
    }

    /// First 16 hex digits of the SHA-256 of the command name, seed and
    /// effective configuration.
    pub fn hash(&self, command: &str, seed: u64) -> String {
        let json = serde_json::to_string(&(command, seed, self)).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_override_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"epsilon": 0.017, "hem": {"gesture_k": 3}}"#).unwrap();
        let c = RunConfig::load(Some(&p)).unwrap();
        assert_eq!(c.epsilon, 0.017);
        assert_eq!(c.hem.gesture_k, 3);
        assert_eq!(c.hem.verbal, RunConfig::default().hem.verbal);
        fs::write(&p, r#"{"epsilonn": 1}"#).unwrap();
        assert!(RunConfig::load(Some(&p)).is_err());
    }

    #[test]
    fn hash_tracks_every_input() {
        let c = RunConfig::default();
        let h = c.hash("train", 1);
        assert_eq!(h.len(), 16);
        assert_eq!(h, c.hash("train", 1));
        assert_ne!(h, c.hash("train", 2));
        assert_ne!(h, c.hash("grid", 1));
        let mut d = c.clone();
        d.lambda = 5.0;
        assert_ne!(h, d.hash("train", 1));
    }
}
