use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{RecordKind, SimulationRecord};
use crate::error::{Error, Result};
use crate::scene::{Material, Pose, SceneConfig};

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "granular-dataset";
const VERSION: u32 = 1;

/// Location of a binary payload inside the dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobRef {
    pub file: String,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecordEntry {
    pub kind: RecordKind,
    pub start: Pose,
    pub actions: Vec<Pose>,
    /// Stored frames, `actions.len() + 1`.
    pub frames: usize,
    pub particles: usize,
    pub dim: usize,
    /// `[frame][particle][axis]` little-endian `f32`.
    pub positions: BlobRef,
    /// One material tag byte per particle.
    pub material: BlobRef,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: SceneConfig,
    pub records: Vec<RecordEntry>,
}

/// Encodes values as little-endian `f32`.
pub fn f32_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

/// Decodes little-endian `f32` values; the length must be a multiple of 4.
pub fn f32_values(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 4 != 0 {
        return Err(Error::Format(format!(
            "{} bytes is not a whole number of f32",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Writes a flat point array as a headerless little-endian `f32` file.
pub fn write_points(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, f32_bytes(values))?;
    Ok(())
}

pub fn read_points(path: &Path) -> Result<Vec<f64>> {
    f32_values(&fs::read(path)?)
}

/// Writes records sharing one scene configuration to `dir`.
pub fn write_dataset(records: &[SimulationRecord], dir: &Path) -> Result<()> {
    let config = match records.first() {
        Some(r) => r.config.clone(),
        None => return Err(Error::EmptyDataset),
    };
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.config != config {
            return Err(Error::Config(format!(
                "record {i} uses a different scene configuration"
            )));
        }
        let n = r.num_particles();
        let d = r.config.dim;
        if r.frames.len() != r.actions.len() + 1 || r.frames.iter().any(|f| f.len() != n * d) {
            return Err(Error::Shape(format!(
                "record {i} frames do not match its particles and actions"
            )));
        }
        let pos_file = format!("record_{i:04}.f32");
        let mat_file = format!("record_{i:04}.tags");
        let flat: Vec<f64> = r.frames.iter().flatten().copied().collect();
        let bytes = f32_bytes(&flat);
        fs::write(dir.join(&pos_file), &bytes)?;
        let tags: Vec<u8> = r.material.iter().map(|m| m.tag()).collect();
        fs::write(dir.join(&mat_file), &tags)?;
        entries.push(RecordEntry {
            kind: r.kind.clone(),
            start: r.start,
            actions: r.actions.clone(),
            frames: r.frames.len(),
            particles: n,
            dim: d,
            positions: BlobRef {
                file: pos_file,
                offset: 0,
                bytes: bytes.len() as u64,
            },
            material: BlobRef {
                file: mat_file,
                offset: 0,
                bytes: tags.len() as u64,
            },
        });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        config,
        records: entries,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format {} v{}",
            m.format, m.version
        )));
    }
    Ok(m)
}

fn read_blob(dir: &Path, blob: &BlobRef, expected: u64, what: &str) -> Result<Vec<u8>> {
    if blob.bytes != expected {
        return Err(Error::Format(format!(
            "{what}: manifest declares {} bytes but shape needs {expected}",
            blob.bytes
        )));
    }
    let data = fs::read(dir.join(&blob.file))?;
    let start = blob.offset as usize;
    let end = start + expected as usize;
    if data.len() < end || (blob.offset == 0 && data.len() != end) {
        return Err(Error::Format(format!(
            "{what}: payload holds {} bytes, shape needs {expected} at offset {}",
            data.len(),
            blob.offset
        )));
    }
    Ok(data[start..end].to_vec())
}

/// Reads a dataset written by [`write_dataset`], checking every payload
/// against the shapes declared in the manifest.
pub fn read_dataset(dir: &Path) -> Result<Vec<SimulationRecord>> {
    let m = read_manifest(dir)?;
    let mut config = m.config;
    config.validate()?;
    let mut out = Vec::with_capacity(m.records.len());
    for (i, e) in m.records.into_iter().enumerate() {
        if e.dim != config.dim {
            return Err(Error::Format(format!(
                "record {i}: dim {} vs scene {}",
                e.dim, config.dim
            )));
        }
        if e.frames != e.actions.len() + 1 {
            return Err(Error::Format(format!(
                "record {i}: {} frames for {} actions",
                e.frames,
                e.actions.len()
            )));
        }
        let what = format!("record {i}");
        let pos_bytes = (e.frames * e.particles * e.dim * 4) as u64;
        let values = f32_values(&read_blob(dir, &e.positions, pos_bytes, &what)?)?;
        let tags = read_blob(dir, &e.material, e.particles as u64, &what)?;
        let material = tags
            .iter()
            .map(|&t| Material::from_tag(t).ok_or_else(|| Error::Format(format!("{what}: material tag {t}"))))
            .collect::<Result<Vec<_>>>()?;
        let stride = e.particles * e.dim;
        let frames = if stride == 0 {
            vec![Vec::new(); e.frames]
        } else {
            values.chunks_exact(stride).map(|c| c.to_vec()).collect()
        };
        out.push(SimulationRecord {
            config: config.clone(),
            kind: e.kind,
            start: e.start,
            actions: e.actions,
            frames,
            material,
        });
    }
    Ok(out)
}
