//! Run configuration: defaults, the desk preset, JSON overrides and the
//! content hash that names the run directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dog_core::gae::GaeConfig;
use dog_core::ldm::LdmConfig;
use dog_core::lowrank::{CvBudget, CvGrid, GcnConfig, LowRankConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory with `features.txt`, `edges.txt` and `labels.txt`.
    pub data_dir: PathBuf,
    /// Balanced K-means cluster count.
    pub clusters: usize,
    pub kmeans_iters: usize,
    pub gae: GaeConfig,
    pub ldm: LdmConfig,
    /// Guidance strength.
    pub omega: f64,
    /// Synthetic nodes as a multiple of the labeled set size.
    pub beta_syn: usize,
    pub max_degree: Option<usize>,
    pub gcn: GcnConfig,
    pub lowrank: LowRankConfig,
    pub cv: CvSettings,
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub grid: CvGridConfig,
    pub budget: CvBudget,
}

/// Serde mirror of [`CvGrid`] with the standard grid as default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvGridConfig {
    pub gammas: Vec<f64>,
    pub taus: Vec<f64>,
    pub betas: Vec<usize>,
}

impl Default for CvGridConfig {
    fn default() -> Self {
        let g = CvGrid::standard();
        Self {
            gammas: g.gammas,
            taus: g.taus,
            betas: g.betas,
        }
    }
}

impl From<&CvGridConfig> for CvGrid {
    fn from(c: &CvGridConfig) -> Self {
        CvGrid {
            gammas: c.gammas.clone(),
            taus: c.taus.clone(),
            betas: c.betas.clone(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            clusters: 100,
            kmeans_iters: 30,
            gae: GaeConfig::default(),
            ldm: LdmConfig::default(),
            omega: 0.5,
            beta_syn: 3,
            max_degree: None,
            gcn: GcnConfig::default(),
            lowrank: LowRankConfig {
                tau: 0.1,
                gamma: 0.2,
            },
            cv: CvSettings::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Shorter schedules for single-core runs.
    pub fn desk() -> Self {
        let mut c = Self::default();
        c.gae.phase1_epochs = 200;
        c.gae.phase2_epochs = 200;
        c.ldm.epochs = 500;
        c.ldm.batch_size = 16;
        c.ldm.t_max = 200;
        c.ldm.beta_start = 5e-4;
        c.ldm.beta_end = 0.1;
        c
    }

    /// Preset, then the JSON file's fields on top.
    pub fn load(path: Option<&Path>, desk: bool) -> Result<Self> {
        let base = if desk { Self::desk() } else { Self::default() };
        let Some(path) = path else { return Ok(base) };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let patch: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut merged = serde_json::to_value(&base)?;
        merge(&mut merged, patch);
        serde_json::from_value(merged).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Copies the master seed into every stage.
    pub fn resolved(mut self) -> Self {
        self.gae.seed = self.seed;
        self.ldm.seed = self.seed.wrapping_add(1);
        self.gcn.seed = self.seed.wrapping_add(3);
        self
    }

    pub fn kmeans_seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            bail!("clusters must be positive");
        }
        if self.omega < 0.0 {
            bail!("omega must be nonnegative");
        }
        if self.max_degree == Some(0) {
            bail!("max_degree must be positive when set");
        }
        self.lowrank.validate()?;
        self.ldm.schedule()?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Recursive object merge; non-object values replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.clusters, 100);
        assert_eq!(c.omega, 0.5);
        assert_eq!(c.ldm.t_max, 1000);
        let d = RunConfig::desk();
        assert_eq!(
            (
                d.gae.phase1_epochs,
                d.gae.phase2_epochs,
                d.ldm.epochs,
                d.ldm.t_max
            ),
            (200, 200, 500, 200)
        );
        d.validate().unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn file_overrides_preset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(
            &p,
            r#"{"clusters": 7, "gae": {"latent_dim": 8}, "seed": 3}"#,
        )
        .unwrap();
        let c = RunConfig::load(Some(&p), true).unwrap();
        assert_eq!(c.clusters, 7);
        assert_eq!(c.gae.latent_dim, 8);
        assert_eq!(c.gae.phase1_epochs, 200);
        assert_eq!(c.seed, 3);
        std::fs::write(&p, r#"{"clustres": 7}"#).unwrap();
        assert!(RunConfig::load(Some(&p), false).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default().resolved();
        assert_eq!(a.hash(), a.clone().hash());
        assert_eq!(a.hash().len(), 16);
        let b = RunConfig {
            seed: 1,
            ..RunConfig::default()
        }
        .resolved();
        assert_ne!(a.hash(), b.hash());
    }
}
