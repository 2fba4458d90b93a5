//! Parameter files: an 8-byte magic, a little-endian `u64` manifest length,
//! a JSON manifest of tensor names and shapes, then every tensor as
//! row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{tensors, Parameters};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DOGTNSR1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tensors: Vec<TensorEntry>,
    /// Free-form metadata (configuration, provenance).
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// Serializes `params` into the checkpoint byte format.
pub fn to_bytes<P: Parameters + ?Sized>(params: &P, meta: serde_json::Value) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut data: Vec<&[f64]> = Vec::new();
    params.visit("", &mut |name, shape, d| {
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
        });
        data.push(d);
    });
    let manifest = serde_json::to_vec(&Manifest { tensors: entries, meta }).expect("manifest serializes");
    let n_values: usize = data.iter().map(|d| d.len()).sum();
    let mut out = Vec::with_capacity(16 + manifest.len() + 8 * n_values);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for d in data {
        for v in d {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Reads only the manifest, so callers can size parameters before loading.
pub fn read_manifest(bytes: &[u8]) -> Result<Manifest> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated manifest"))?;
    serde_json::from_slice(body).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))
}

/// Loads bytes into `params`, whose tensor names and shapes must match.
pub fn from_bytes<P: Parameters + ?Sized>(params: &mut P, bytes: &[u8]) -> Result<Manifest> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    let manifest = read_manifest(bytes)?;
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;

    let mut expected = Vec::new();
    params.visit("", &mut |name, shape, _| {
        expected.push(TensorEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
        })
    });
    if expected != manifest.tensors {
        return Err(bad("tensor names or shapes differ from the model"));
    }
    let sizes: Vec<usize> = tensors(params).iter().map(|t| t.len()).collect();
    let total: usize = sizes.iter().sum();
    let data = &bytes[16 + len..];
    if data.len() != 8 * total {
        return Err(Error::Checkpoint(format!(
            "expected {} data bytes, found {}",
            8 * total,
            data.len()
        )));
    }
    let mut chunks = data.chunks_exact(8);
    params.visit_mut(&mut |t| {
        for v in t.iter_mut() {
            *v = f64::from_le_bytes(chunks.next().expect("length checked").try_into().expect("8 bytes"));
        }
    });
    Ok(manifest)
}

pub fn save<P: Parameters + ?Sized>(path: &Path, params: &P, meta: serde_json::Value) -> Result<()> {
    fs::write(path, to_bytes(params, meta)).map_err(|e| Error::io(path, e))
}

pub fn load<P: Parameters + ?Sized>(path: &Path, params: &mut P) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(params, &bytes)
}
