//! Run directory bookkeeping. Every artifact gets a `<name>.meta.json`
//! sidecar recording the producing config hash, stage and file checksum.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config_hash: String,
    pub stage: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
    hash: String,
    /// Accept artifacts produced under another config hash.
    force: bool,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .expect("artifact has a file name")
        .to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

impl RunDir {
    pub fn create(root: PathBuf, hash: String, force: bool) -> Result<Self> {
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root, hash, force })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Records the sidecar for an artifact that was just written.
    pub fn seal(&self, name: &str, stage: &str) -> Result<()> {
        let path = self.path(name);
        let side = Sidecar {
            config_hash: self.hash.clone(),
            stage: stage.to_string(),
            sha256: sha256_file(&path)?,
        };
        fs::write(sidecar_path(&path), serde_json::to_vec_pretty(&side)?)
            .with_context(|| format!("writing sidecar for {name}"))
    }

    pub fn write(&self, name: &str, stage: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.seal(name, stage)?;
        Ok(path)
    }

    /// Sidecar of an existing artifact, `None` when the artifact or its
    /// sidecar is absent.
    pub fn sidecar(&self, name: &str) -> Result<Option<Sidecar>> {
        let path = self.path(name);
        let side = sidecar_path(&path);
        if !path.exists() || !side.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&side)?;
        Ok(Some(serde_json::from_str(&text).with_context(|| {
            format!("bad sidecar {}", side.display())
        })?))
    }

    /// Path of an upstream artifact, refusing missing ones and, without
    /// `force`, ones produced under another config hash.
    pub fn input(&self, name: &str, producer: &str) -> Result<PathBuf> {
        match self.sidecar(name)? {
            None => bail!(
                "missing upstream artifact {} (run `dog {producer}` first)",
                self.path(name).display()
            ),
            Some(s) if s.config_hash != self.hash && !self.force => bail!(
                "{name} was produced under config {} but this run is {}; pass --force to mix them",
                s.config_hash,
                self.hash
            ),
            Some(_) => Ok(self.path(name)),
        }
    }

    /// Whether `name` exists with this run's hash (used to resume).
    pub fn is_fresh(&self, name: &str) -> Result<bool> {
        Ok(self
            .sidecar(name)?
            .is_some_and(|s| s.config_hash == self.hash))
    }
}
