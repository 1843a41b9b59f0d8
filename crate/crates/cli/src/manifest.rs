use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST_FILE: &str = "run_manifest.json";

/// Provenance record written once into every output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    /// Effective configuration after defaults and overrides.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Tree hash over every input file.
    pub input_hash: String,
    /// Tree hash over the output directory, excluding this manifest.
    pub output_hash: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Object hash in the style of git blobs: `sha256("blob <len>\0" ++ data)`.
pub fn blob_hash(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", data.len()).as_bytes());
    h.update(data);
    hex(&h.finalize())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path
            .strip_prefix(root)
            .map(|p| p != Path::new(MANIFEST_FILE))
            .unwrap_or(true)
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Files under `path` in sorted order, skipping a top-level run manifest.
/// A plain file yields itself.
pub fn list_files(path: &Path) -> CliResult<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    Ok(files)
}

/// Tree hash over named inputs: one `<blob-hash> <name>` line per file.
pub fn tree_hash(paths: &[PathBuf]) -> CliResult<String> {
    let mut lines = Vec::new();
    for root in paths {
        for f in list_files(root)? {
            let name = if root.is_dir() {
                f.strip_prefix(root).unwrap_or(&f).to_path_buf()
            } else {
                PathBuf::from(f.file_name().unwrap_or_default())
            };
            lines.push(format!("{} {}\n", blob_hash(&fs::read(&f)?), name.display()));
        }
    }
    Ok(blob_hash(lines.concat().as_bytes()))
}

/// Hash of an output directory's artifacts.
pub fn output_hash(dir: &Path) -> CliResult<String> {
    tree_hash(&[dir.to_path_buf()])
}

/// Tracks one command invocation and writes its manifest on completion.
pub struct Run {
    command: String,
    started: f64,
    inputs: Vec<PathBuf>,
    /// Hash of inline inputs such as preset configs.
    extra_input: Vec<u8>,
}

impl Run {
    pub fn start(command: &str) -> Self {
        Run {
            command: command.to_string(),
            started: unix_now(),
            inputs: Vec::new(),
            extra_input: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn inline_input(&mut self, bytes: &[u8]) {
        self.extra_input.extend_from_slice(bytes);
    }

    pub fn finish<C: Serialize>(self, out: &Path, config: &C, seeds: Vec<u64>) -> CliResult<RunManifest> {
        let mut input_hash = tree_hash(&self.inputs)?;
        if !self.extra_input.is_empty() {
            input_hash = blob_hash(format!("{input_hash}{}", blob_hash(&self.extra_input)).as_bytes());
        }
        let outputs = list_files(out)?
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).display().to_string())
            .collect();
        let manifest = RunManifest {
            command: self.command,
            args: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            seeds,
            input_hash,
            output_hash: output_hash(out)?,
            started_unix: self.started,
            finished_unix: unix_now(),
            outputs,
        };
        fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}
