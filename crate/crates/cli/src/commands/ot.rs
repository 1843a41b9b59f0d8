use std::fs;

use granular_core::datagen::read_points;
use granular_core::ot::{exact_w2, sinkhorn_divergence, PointCloud, SinkhornConfig, SinkhornResult, EXACT_MAX_POINTS};
use serde::Serialize;

use super::prepare_out;
use crate::error::{usage, CliResult};
use crate::manifest::Run;
use crate::OtArgs;

#[derive(Serialize)]
struct Report {
    points_a: usize,
    points_b: usize,
    sinkhorn: SinkhornConfig,
    sinkhorn_divergence: SinkhornResult,
    /// Present when both clouds have the same size within the exact-solver limit.
    exact_w2: Option<f64>,
}

fn load(path: &std::path::Path, dim: usize) -> CliResult<PointCloud> {
    let v = read_points(path)?;
    if v.len() % dim != 0 {
        return usage(format!(
            "{} holds {} values, not a multiple of {dim}",
            path.display(),
            v.len()
        ));
    }
    Ok(PointCloud::new(dim, v)?)
}

/// Diagonal of the joint bounding box.
fn joint_diagonal(a: &PointCloud, b: &PointCloud) -> f64 {
    let d = a.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in a.points().chunks_exact(d).chain(b.points().chunks_exact(d)) {
        for k in 0..d {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l).powi(2)).sum::<f64>().sqrt()
}

pub fn run(args: &OtArgs) -> CliResult<()> {
    if !(args.dim == 2 || args.dim == 3) {
        return usage("--dim must be 2 or 3");
    }
    let mut run = Run::start("ot");
    run.input(&args.a);
    run.input(&args.b);
    let a = load(&args.a, args.dim)?;
    let b = load(&args.b, args.dim)?;
    let cfg = match args.epsilon {
        Some(e) if e > 0.0 => SinkhornConfig::new(e),
        Some(_) => return usage("--epsilon must be positive"),
        None => SinkhornConfig::for_diagonal(joint_diagonal(&a, &b).max(1e-12)),
    };
    prepare_out(&args.out)?;
    let div = sinkhorn_divergence(&a, &b, &cfg)?;
    let exact = if a.len() == b.len() && a.len() <= EXACT_MAX_POINTS {
        Some(exact_w2(&a, &b)?)
    } else {
        None
    };
    let report = Report {
        points_a: a.len(),
        points_b: b.len(),
        sinkhorn: cfg,
        sinkhorn_divergence: div,
        exact_w2: exact,
    };
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(args.out.join("ot.json"), &text)?;
    run.finish(&args.out, &cfg, Vec::new())?;
    println!("{text}");
    Ok(())
}
