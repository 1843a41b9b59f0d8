use granular_core::datagen::read_dataset;
use granular_core::eval::BoxStats;
use granular_core::gns::GnsConfig;
use granular_core::Gns32;
use serde::Serialize;

use super::rollout::score_model;
use super::{box_header, box_row, prepare_out, select_records};
use crate::error::CliResult;
use crate::manifest::Run;
use crate::AblationArgs;

#[derive(Serialize)]
struct Row {
    checkpoint: String,
    config: GnsConfig,
    /// Mean-over-steps W2 per test record.
    per_record: Vec<f64>,
    stats: BoxStats,
}

pub fn run(args: &AblationArgs) -> CliResult<()> {
    let mut run = Run::start("ablation");
    run.input(&args.test);
    let picked = select_records(read_dataset(&args.test)?, &args.records, args.families_only)?;
    let mut models = Vec::with_capacity(args.checkpoints.len());
    for dir in &args.checkpoints {
        run.input(dir);
        models.push(Gns32::load(dir)?);
    }
    prepare_out(&args.out)?;
    let mut rows = Vec::with_capacity(models.len());
    for (dir, model) in args.checkpoints.iter().zip(&models) {
        let scored = score_model(model, &picked)?;
        let per_record: Vec<f64> = scored.iter().map(|(_, m)| m.mean_w2).collect();
        rows.push(Row {
            checkpoint: dir.display().to_string(),
            config: model.config.clone(),
            stats: BoxStats::new(&per_record)?,
            per_record,
        });
    }
    let mut w = csv::Writer::from_path(args.out.join("ablation.csv"))?;
    w.write_record(box_header("model"))?;
    for r in &rows {
        w.write_record(box_row(&r.checkpoint, &r.stats))?;
    }
    w.flush()?;
    std::fs::write(args.out.join("ablation.json"), serde_json::to_string_pretty(&rows)?)?;
    let records: Vec<usize> = picked.iter().map(|(i, _)| *i).collect();
    run.finish(&args.out, &records, Vec::new())?;
    for r in &rows {
        println!("{}: median {:.4e}", r.checkpoint, r.stats.median);
    }
    Ok(())
}
