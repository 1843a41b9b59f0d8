use std::fs;

use granular_core::datagen::{read_dataset, write_points, SimulationRecord};
use granular_core::eval::{granular_w2, rollout_records, BoxStats};
use granular_core::Gns32;
use serde::Serialize;

use super::{box_header, box_row, prepare_out, select_records};
use crate::error::{usage, CliResult};
use crate::manifest::Run;
use crate::RolloutArgs;

/// Per-record rollout accuracy.
#[derive(Clone, Debug, Serialize)]
pub struct RecordMetrics {
    pub record: usize,
    /// Recorded frame the rollout starts from.
    pub start: usize,
    /// Exact W2 of the granular clouds at each predicted frame.
    pub w2: Vec<f64>,
    pub final_w2: f64,
    pub mean_w2: f64,
}

/// Predicted frames (starting with the seed frame) and metrics per record.
pub type Scored = Vec<(Vec<Vec<f64>>, RecordMetrics)>;

fn metrics(record: usize, start: usize, w2: Vec<f64>) -> RecordMetrics {
    let final_w2 = w2.last().copied().unwrap_or(0.0);
    let mean_w2 = if w2.is_empty() {
        0.0
    } else {
        w2.iter().sum::<f64>() / w2.len() as f64
    };
    RecordMetrics {
        record,
        start,
        w2,
        final_w2,
        mean_w2,
    }
}

fn check_length(idx: usize, r: &SimulationRecord, history: usize) -> CliResult<()> {
    if r.frames.len() < history + 2 {
        return usage(format!(
            "record {idx} has {} frames, history {history} needs at least {}",
            r.frames.len(),
            history + 2
        ));
    }
    Ok(())
}

/// Model rollouts along every selected record.
pub fn score_model(model: &Gns32, picked: &[(usize, SimulationRecord)]) -> CliResult<Scored> {
    for (i, r) in picked {
        check_length(*i, r, model.config.history)?;
        if r.config.dim != model.config.dim {
            return usage(format!(
                "record {i} is {}D, model is {}D",
                r.config.dim, model.config.dim
            ));
        }
    }
    let refs: Vec<&SimulationRecord> = picked.iter().map(|(_, r)| r).collect();
    let outs = rollout_records(model, &refs)?;
    Ok(picked
        .iter()
        .zip(outs)
        .map(|((i, _), o)| (o.rollout.frames, metrics(*i, o.start, o.w2)))
        .collect())
}

/// Ground truth fed back as the prediction; every distance is zero.
fn score_oracle(picked: &[(usize, SimulationRecord)], history: usize) -> CliResult<Scored> {
    picked
        .iter()
        .map(|(i, r)| {
            check_length(*i, r, history)?;
            let frames = r.frames[history..].to_vec();
            let w2 = frames[1..]
                .iter()
                .zip(&r.frames[history + 1..])
                .map(|(p, t)| granular_w2(p, t, &r.material, r.config.dim))
                .collect::<granular_core::Result<Vec<_>>>()?;
            Ok((frames, metrics(*i, history, w2)))
        })
        .collect()
}

#[derive(Serialize)]
struct Snapshot<'a> {
    oracle: bool,
    history: usize,
    records: Vec<usize>,
    model: Option<&'a granular_core::gns::GnsConfig>,
}

pub fn run(args: &RolloutArgs) -> CliResult<()> {
    let mut run = Run::start("rollout");
    run.input(&args.reference);
    let picked = select_records(read_dataset(&args.reference)?, &args.records, false)?;
    let model = match (&args.checkpoint, args.oracle) {
        (Some(dir), false) => {
            run.input(dir);
            Some(Gns32::load(dir)?)
        }
        _ => None,
    };
    prepare_out(&args.out)?;
    let scored = match &model {
        Some(m) => score_model(m, &picked)?,
        None => score_oracle(&picked, args.history)?,
    };
    for (frames, m) in &scored {
        let flat: Vec<f64> = frames.iter().flatten().copied().collect();
        write_points(&args.out.join(format!("rollout_{:04}.f32", m.record)), &flat)?;
    }
    let all: Vec<&RecordMetrics> = scored.iter().map(|(_, m)| m).collect();
    fs::write(args.out.join("metrics.json"), serde_json::to_string_pretty(&all)?)?;
    let mut w = csv::Writer::from_path(args.out.join("metrics.csv"))?;
    w.write_record(box_header("metric"))?;
    let finals: Vec<f64> = all.iter().map(|m| m.final_w2).collect();
    let means: Vec<f64> = all.iter().map(|m| m.mean_w2).collect();
    w.write_record(box_row("final_w2", &BoxStats::new(&finals)?))?;
    w.write_record(box_row("mean_w2", &BoxStats::new(&means)?))?;
    w.flush()?;
    let history = model.as_ref().map_or(args.history, |m| m.config.history);
    let snapshot = Snapshot {
        oracle: model.is_none(),
        history,
        records: all.iter().map(|m| m.record).collect(),
        model: model.as_ref().map(|m| &m.config),
    };
    run.finish(&args.out, &snapshot, Vec::new())?;
    println!(
        "rolled out {} records; median final W2 {:.4e}",
        all.len(),
        BoxStats::new(&finals)?.median
    );
    Ok(())
}
