use granular_core::datagen::{generate_dataset_with, write_dataset, DatagenOptions, FamilyKind};
use granular_core::scene::SceneConfig;
use serde::Serialize;

use super::prepare_out;
use crate::error::{usage, CliResult};
use crate::manifest::Run;
use crate::{GenDataArgs, Preset};

#[derive(Serialize)]
struct Snapshot<'a> {
    scene: &'a SceneConfig,
    sims: usize,
    seed: u64,
    families: Vec<&'static str>,
    special_records: bool,
}

pub fn run(args: &GenDataArgs) -> CliResult<()> {
    let mut run = Run::start("gen-data");
    let mut scene = match (&args.scene, args.preset) {
        (Some(path), _) => {
            run.input(path);
            SceneConfig::load(path)?
        }
        (None, Some(Preset::Desk2d)) => SceneConfig::desk_2d(),
        (None, Some(Preset::Paper3d)) => SceneConfig::paper_3d(),
        (None, None) => return usage("either --scene or --preset is required"),
    };
    if let Some(h) = args.horizon {
        scene.horizon = h;
    }
    scene.validate()?;
    run.inline_input(scene.to_json()?.as_bytes());
    let special = !args.no_special;
    let minimum = if special { 2 } else { 1 };
    if args.sims < minimum {
        return usage(format!("--sims must be at least {minimum}"));
    }
    let families = args
        .families
        .iter()
        .map(|s| s.parse::<FamilyKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let opts = DatagenOptions {
        families: families.clone(),
        special_records: special,
        ..DatagenOptions::default()
    };
    prepare_out(&args.out)?;
    let records = generate_dataset_with(&scene, args.sims, args.seed, &opts)?;
    write_dataset(&records, &args.out)?;
    let snapshot = Snapshot {
        scene: &scene,
        sims: args.sims,
        seed: args.seed,
        families: families.iter().map(|f| f.name()).collect(),
        special_records: special,
    };
    run.finish(&args.out, &snapshot, vec![args.seed])?;
    println!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}
