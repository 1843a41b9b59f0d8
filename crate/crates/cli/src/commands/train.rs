use std::fs;

use granular_core::datagen::read_dataset;
use granular_core::gns::{train_model, GnsConfig, LossVariant, TrainOptions};
use granular_core::graph::TrajectoryView;
use serde::Serialize;

use super::prepare_out;
use crate::error::{usage, CliResult};
use crate::manifest::Run;
use crate::{Switch, TrainArgs};

/// Width used when neither a config file nor `--width` sets one.
const DEFAULT_WIDTH: usize = 32;

#[derive(Serialize)]
struct Snapshot<'a> {
    model: &'a GnsConfig,
    train: &'a TrainOptions,
    records: usize,
}

/// Base configuration from a file or the flagship preset at desk width.
fn base_config(args: &TrainArgs, dim: usize, run: &mut Run) -> CliResult<GnsConfig> {
    match &args.config {
        Some(path) => {
            run.input(path);
            let cfg: GnsConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
            if cfg.dim != dim {
                return usage(format!("model config has dim {}, dataset has dim {dim}", cfg.dim));
            }
            Ok(cfg)
        }
        None => Ok(GnsConfig {
            latent_width: DEFAULT_WIDTH,
            hidden_width: DEFAULT_WIDTH,
            ..GnsConfig::flagship(dim)
        }),
    }
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let mut run = Run::start("train");
    run.input(&args.data);
    let records = read_dataset(&args.data)?;
    let scene = match records.first() {
        Some(r) => r.config.clone(),
        None => return usage("dataset has no records"),
    };
    let mut cfg = base_config(args, scene.dim, &mut run)?;
    if let Some(k) = args.k {
        cfg.message_passing_steps = k;
    }
    if let Some(c) = args.history {
        cfg.history = c;
    }
    if let Some(s) = args.controls {
        cfg.use_controls = s == Switch::On;
    }
    if let Some(l) = &args.loss {
        cfg.loss = l.parse::<LossVariant>()?;
    }
    if let Some(w) = args.width {
        cfg.latent_width = w;
        cfg.hidden_width = w;
    }
    cfg.validate()?;
    let mut opts = TrainOptions {
        epochs: args.epochs,
        seed: args.seed,
        ..TrainOptions::default()
    };
    if let Some(lr) = args.lr {
        opts.schedule.base = lr;
    }
    if let Some(n) = args.samples_per_epoch {
        opts.samples_per_epoch = n;
    }
    if let Some(b) = args.batch_size {
        opts.batch_size = b;
    }
    if let Some(s) = args.noise {
        opts.noise_std = s;
    }
    prepare_out(&args.out)?;
    let views: Vec<TrajectoryView> = records.iter().map(|r| r.view()).collect();
    let (model, curve) = train_model::<f32>(&views, &scene, cfg.clone(), &opts)?;
    model.save(&args.out.join("checkpoint"))?;
    let mut w = csv::Writer::from_path(args.out.join("loss_curve.csv"))?;
    w.write_record(["epoch", "loss"])?;
    for (i, l) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:e}")])?;
    }
    w.flush()?;
    let snapshot = Snapshot {
        model: &cfg,
        train: &opts,
        records: records.len(),
    };
    run.finish(&args.out, &snapshot, vec![args.seed])?;
    println!(
        "trained {} parameters for {} epochs; final loss {}",
        model.num_parameters(),
        curve.len(),
        curve.last().map_or("n/a".to_string(), |l| format!("{l:.4e}"))
    );
    Ok(())
}
