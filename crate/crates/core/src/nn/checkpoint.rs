//! Parameter checkpoints: a JSON manifest plus a little-endian `f32` blob.
//!
//! ```text
//! <dir>/manifest.json   {"format", "tensors": [{name, shape, offset}], "meta": {...}}
//! <dir>/params.bin      concatenated tensors in manifest order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tape::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "granular-checkpoint-v1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in bytes into the blob.
    pub offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub tensors: Vec<TensorEntry>,
    pub meta: serde_json::Value,
}

pub fn write_checkpoint<T: Real>(dir: &Path, params: &ParamSet<T>, meta: serde_json::Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut blob = Vec::with_capacity(params.numel() * 4);
    let mut tensors = Vec::with_capacity(params.len());
    for (_, name, t) in params.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: blob.len(),
        });
        for &v in t.data() {
            blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        tensors,
        meta,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    fs::write(dir.join(PARAMS_FILE), blob)?;
    Ok(())
}

pub fn read_checkpoint<T: Real>(dir: &Path) -> Result<(ParamSet<T>, serde_json::Value)> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.format != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!(
            "unknown checkpoint format {:?}",
            manifest.format
        )));
    }
    let blob = fs::read(dir.join(PARAMS_FILE))?;
    let mut params = ParamSet::new();
    let mut expected = 0;
    for e in &manifest.tensors {
        let n: usize = e.shape.iter().product();
        if e.offset != expected || e.offset + 4 * n > blob.len() {
            return Err(Error::Format(format!("tensor {} lies outside the blob", e.name)));
        }
        let data = blob[e.offset..e.offset + 4 * n]
            .chunks_exact(4)
            .map(|b| T::lit(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
            .collect();
        params.add(e.name.clone(), Tensor::from_vec(&e.shape, data)?);
        expected = e.offset + 4 * n;
    }
    if expected != blob.len() {
        return Err(Error::Format(format!(
            "blob has {} bytes, manifest accounts for {expected}",
            blob.len()
        )));
    }
    Ok((params, manifest.meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut ps = ParamSet::<f32>::new();
        ps.add("a", Tensor::from_vec(&[2, 2], vec![1.5, -0.25, 3.0e-7, 42.0]).unwrap());
        ps.add("b", Tensor::zeros(&[3]));
        write_checkpoint(dir.path(), &ps, serde_json::json!({"k": 4})).unwrap();
        let (back, meta) = read_checkpoint::<f32>(dir.path()).unwrap();
        assert_eq!(back, ps);
        assert_eq!(meta["k"], 4);
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut ps = ParamSet::<f32>::new();
        ps.add("a", Tensor::zeros(&[4]));
        write_checkpoint(dir.path(), &ps, serde_json::Value::Null).unwrap();
        fs::write(dir.path().join(PARAMS_FILE), [0u8; 12]).unwrap();
        assert!(matches!(read_checkpoint::<f32>(dir.path()), Err(Error::Format(_))));
    }
}
