pub mod ablation;
pub mod gen_data;
pub mod ot;
pub mod plan;
pub mod rollout;
pub mod train;

use std::fs;
use std::path::Path;

use granular_core::datagen::{RecordKind, SimulationRecord};
use granular_core::eval::BoxStats;

use crate::error::{usage, CliResult};
use crate::manifest::MANIFEST_FILE;

/// Creates the output directory, refusing one that already holds a run.
pub fn prepare_out(dir: &Path) -> CliResult<()> {
    if dir.join(MANIFEST_FILE).exists() {
        return usage(format!("{} already contains a run manifest", dir.display()));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Records picked by index, or every record when `indices` is empty.
pub fn select_records(
    records: Vec<SimulationRecord>,
    indices: &[usize],
    families_only: bool,
) -> CliResult<Vec<(usize, SimulationRecord)>> {
    let n = records.len();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return usage(format!("record {bad} out of range for {n} records"));
    }
    let picked: Vec<(usize, SimulationRecord)> = records
        .into_iter()
        .enumerate()
        .filter(|(i, _)| indices.is_empty() || indices.contains(i))
        .filter(|(_, r)| !families_only || matches!(r.kind, RecordKind::Family(_)))
        .collect();
    if picked.is_empty() {
        return usage("test set is empty");
    }
    Ok(picked)
}

/// Header row for labeled box statistics.
pub fn box_header(label: &str) -> Vec<String> {
    std::iter::once(label.to_string())
        .chain(BoxStats::HEADER.iter().map(|s| s.to_string()))
        .collect()
}

pub fn box_row(label: &str, stats: &BoxStats) -> Vec<String> {
    std::iter::once(label.to_string())
        .chain(stats.values().iter().map(|v| format!("{v:e}")))
        .collect()
}
