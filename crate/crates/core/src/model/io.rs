//! On-disk bundle: `manifest.json` plus `tensors.bin` (little-endian f32,
//! row-major, concatenated).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelBundle, ModelConfig, Tensor};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSORS_FILE: &str = "tensors.bin";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    byte_len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config: ModelConfig,
    tensors: BTreeMap<String, TensorEntry>,
}

pub fn save_model(model: &ModelBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::new();
    let mut entries = BTreeMap::new();
    for (name, t) in model.tensors() {
        let offset = blob.len() as u64;
        for v in &t.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        entries.insert(
            name.clone(),
            TensorEntry {
                shape: t.shape.clone(),
                dtype: "f32".into(),
                offset,
                byte_len: blob.len() as u64 - offset,
            },
        );
    }
    let manifest = Manifest {
        config: model.config().clone(),
        tensors: entries,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("manifest", e))?;
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))?;
    let tpath = dir.join(TENSORS_FILE);
    fs::write(&tpath, blob).map_err(|e| Error::io(&tpath, e))?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<ModelBundle> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::json(mpath.display().to_string(), e))?;
    let tpath = dir.join(TENSORS_FILE);
    let blob = fs::read(&tpath).map_err(|e| Error::io(&tpath, e))?;

    let mut tensors = BTreeMap::new();
    for (name, entry) in manifest.tensors {
        if entry.dtype != "f32" {
            return Err(Error::InvalidInput(format!(
                "tensor `{name}` has unsupported dtype `{}`",
                entry.dtype
            )));
        }
        let n: usize = entry.shape.iter().product();
        if entry.byte_len != 4 * n as u64 {
            return Err(Error::InvalidInput(format!(
                "tensor `{name}`: byte_len {} does not match shape {:?}",
                entry.byte_len, entry.shape
            )));
        }
        let start = entry.offset as usize;
        let end = start
            .checked_add(entry.byte_len as usize)
            .filter(|&e| e <= blob.len())
            .ok_or_else(|| {
                Error::Integrity(format!("tensor `{name}` extends past end of {TENSORS_FILE}"))
            })?;
        let data = blob[start..end]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        tensors.insert(
            name,
            Tensor {
                shape: entry.shape,
                data,
            },
        );
    }
    ModelBundle::new(manifest.config, tensors)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::super::Activation;
    use super::*;

    #[test]
    fn round_trip_preserves_every_tensor() {
        let c = tiny_config(Activation::Silu);
        let m = random_model(&c, 21);
        let dir = tempfile::tempdir().unwrap();
        save_model(&m, dir.path()).unwrap();
        let back = load_model(dir.path()).unwrap();
        assert_eq!(back.config(), m.config());
        assert_eq!(back.tensors(), m.tensors());
        for l in 0..2 {
            for s in ["w_gate", "w_up", "w_down"] {
                assert!(back.tensors().contains_key(&format!("layers.{l}.mlp.{s}")));
            }
        }
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let c = tiny_config(Activation::Silu);
        let m = random_model(&c, 22);
        let dir = tempfile::tempdir().unwrap();
        save_model(&m, dir.path()).unwrap();
        let p = dir.path().join(TENSORS_FILE);
        let blob = fs::read(&p).unwrap();
        fs::write(&p, &blob[..blob.len() - 8]).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Integrity(_))));
    }
}
