//! Run configuration: one JSON file, overridable from the command line
//! with `--set key=value` using dotted paths.

use crate::error::{Error, Result};
use crate::measures::Window;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

fn default_samples() -> usize {
    1000
}
fn default_seed() -> u64 {
    42
}
fn default_trunc_eps() -> f64 {
    1e-6
}
fn default_degree_cap() -> u32 {
    10
}
fn default_n_max() -> usize {
    3
}
fn default_ladder_levels() -> usize {
    4
}
fn default_cells_per_axis() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: crate::models::MeasureModel,
    /// sampling / analysis window; defaults to the largest ladder cube
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default = "default_ladder_levels")]
    pub ladder_levels: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trunc_eps")]
    pub trunc_eps: f64,
    #[serde(default = "default_degree_cap")]
    pub degree_cap: u32,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_cells_per_axis")]
    pub cells_per_axis: usize,
    #[serde(default)]
    pub tolerances: crate::momentproblem::DecisionTolerances,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.samples < 1 {
            return Err(Error::Config("sample count must be ≥ 1".into()));
        }
        if self.degree_cap > crate::moments::MAX_DEGREE_CAP {
            return Err(Error::Config(format!(
                "degree cap must be ≤ {}",
                crate::moments::MAX_DEGREE_CAP
            )));
        }
        if self.trunc_eps.is_nan() || self.trunc_eps <= 0.0 {
            return Err(Error::Config("trunc_eps must be > 0".into()));
        }
        if self.n_max < 1 || self.n_max > 4 {
            return Err(Error::Config("n_max must be in 1..=4".into()));
        }
        let t = &self.tolerances;
        if !(t.tol_psd > 0.0 && t.degeneracy_cutoff > 0.0 && t.noise_multiplier > 0.0 && t.flatness_tol > 0.0)
        {
            return Err(Error::Config("tolerances must be > 0".into()));
        }
        if let Some(w) = &self.window {
            Window::new(w.lower.clone(), w.upper.clone())?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.window.as_ref().map_or(1, |w| w.dim())
    }

    pub fn effective_window(&self) -> Window {
        self.window
            .clone()
            .unwrap_or_else(|| Window::centered_cube(self.ladder_levels.max(1) as f64, 1))
    }

    /// SHA-256 of the canonical JSON rendering, embedded in manifests so
    /// outputs are traceable to the exact configuration.
    pub fn hash(&self) -> String {
        let js = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(js.as_bytes());
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Parse a config file and apply `--set key=value` overrides (dotted
/// paths into the JSON tree; values parsed as JSON scalars, falling back
/// to strings).
pub fn load_config(path: &std::path::Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut tree: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
    for kv in overrides {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set needs key=value, got `{kv}`")))?;
        let value: serde_json::Value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        let mut node = &mut tree;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if i + 1 == parts.len() {
                node[part] = value.clone();
            } else {
                if node.get(*part).is_none() {
                    node[part] = serde_json::Value::Object(Default::default());
                }
                node = node.get_mut(*part).unwrap();
            }
        }
    }
    let cfg: RunConfig =
        serde_json::from_value(tree).map_err(|e| Error::Config(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"model":{"variant":"gamma","rate":1.0}}"#).unwrap();
        let cfg = load_config(&path, &[]).unwrap();
        assert_eq!(cfg.samples, 1000);
        assert_eq!(cfg.seed, 42);
        let cfg = load_config(
            &path,
            &["samples=250".into(), "model.rate=2.5".into(), "tolerances.tol_psd=1e-7".into()],
        )
        .unwrap();
        assert_eq!(cfg.samples, 250);
        assert_eq!(cfg.model, crate::models::MeasureModel::Gamma { rate: 2.5 });
        assert_eq!(cfg.tolerances.tol_psd, 1e-7);
    }

    #[test]
    fn zero_samples_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"model":{"variant":"gamma","rate":1.0},"samples":0}"#).unwrap();
        let err = load_config(&path, &[]).unwrap_err();
        assert!(err.to_string().contains("sample count must be ≥ 1"));
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"model":{"variant":"gamma","rate":1.0}}"#).unwrap();
        let a = load_config(&path, &[]).unwrap().hash();
        let b = load_config(&path, &[]).unwrap().hash();
        let c = load_config(&path, &["seed=7".into()]).unwrap().hash();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
