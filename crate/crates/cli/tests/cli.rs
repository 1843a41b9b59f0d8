use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use granular_core::datagen::{read_dataset, read_points, write_points};
use granular_core::ot::{exact_w2, PointCloud};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_granular"));
    c.arg("--threads").arg("1");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn scratch(name: &str) -> PathBuf {
    let p = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&p);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Six short desk episodes shared by the tests.
fn dataset() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let out = scratch("data6");
        ok(&[
            "gen-data",
            "--preset",
            "desk2d",
            "--sims",
            "6",
            "--seed",
            "7",
            "--horizon",
            "8",
            "--out",
            s(&out),
        ]);
        out
    })
}

/// Checkpoint trained for two epochs on the shared dataset.
fn checkpoint() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let out = scratch("model");
        ok(&[
            "train",
            "--data",
            s(dataset()),
            "--k",
            "2",
            "--history",
            "2",
            "--width",
            "8",
            "--epochs",
            "2",
            "--samples-per-epoch",
            "4",
            "--out",
            s(&out),
        ]);
        out.join("checkpoint")
    })
}

#[test]
fn gen_data_writes_special_records_and_is_deterministic() {
    let records = read_dataset(dataset()).unwrap();
    assert_eq!(records.len(), 6);
    let labels: Vec<String> = records.iter().map(|r| r.kind.label()).collect();
    assert!(labels.iter().any(|l| l == "noise-only"), "{labels:?}");
    assert!(labels.iter().any(|l| l == "no-cup"), "{labels:?}");
    let again = scratch("data6_again");
    ok(&[
        "gen-data",
        "--preset",
        "desk2d",
        "--sims",
        "6",
        "--seed",
        "7",
        "--horizon",
        "8",
        "--out",
        s(&again),
    ]);
    let a = json(&dataset().join("run_manifest.json"));
    let b = json(&again.join("run_manifest.json"));
    assert_eq!(a["output_hash"], b["output_hash"]);
    assert_eq!(a["input_hash"], b["input_hash"]);
    assert_eq!(a["outputs"], b["outputs"]);
}

#[test]
fn gen_data_rejects_a_single_simulation() {
    let out = run(&[
        "gen-data",
        "--preset",
        "desk2d",
        "--sims",
        "1",
        "--out",
        s(&scratch("one")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_data_rejects_invalid_scene_file() {
    let dir = scratch("badscene");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("scene.json");
    fs::write(&cfg, r#"{"dim": 4}"#).unwrap();
    let out = run(&[
        "gen-data",
        "--scene",
        s(&cfg),
        "--sims",
        "2",
        "--out",
        s(&dir.join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn zero_threads_is_a_usage_error() {
    let out = bin().args(["--threads", "0", "ot"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_with_zero_epochs_writes_initial_checkpoint() {
    let out = scratch("train0");
    ok(&[
        "train",
        "--data",
        s(dataset()),
        "--epochs",
        "0",
        "--k",
        "1",
        "--history",
        "2",
        "--width",
        "8",
        "--out",
        s(&out),
    ]);
    assert!(out.join("checkpoint").is_dir());
    let csv = fs::read_to_string(out.join("loss_curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert_eq!(csv.lines().next(), Some("epoch,loss"));
}

#[test]
fn loss_curve_has_one_row_per_epoch() {
    let csv = fs::read_to_string(checkpoint().parent().unwrap().join("loss_curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}

#[test]
fn train_flags_map_onto_model_config() {
    let out = scratch("flagship");
    ok(&[
        "train",
        "--data",
        s(dataset()),
        "--k",
        "10",
        "--history",
        "5",
        "--controls",
        "on",
        "--loss",
        "g",
        "--epochs",
        "0",
        "--out",
        s(&out),
    ]);
    let m = json(&out.join("run_manifest.json"));
    let model = &m["config"]["model"];
    assert_eq!(model["message_passing_steps"], 10);
    assert_eq!(model["history"], 5);
    assert_eq!(model["use_controls"], true);
    assert_eq!(model["loss"], "g");
    let out = scratch("ablated");
    ok(&[
        "train",
        "--data",
        s(dataset()),
        "--controls",
        "off",
        "--loss",
        "g+r",
        "--epochs",
        "0",
        "--out",
        s(&out),
    ]);
    let model = &json(&out.join("run_manifest.json"))["config"]["model"];
    assert_eq!(model["use_controls"], false);
    assert_eq!(model["loss"], "g+r");
}

#[test]
fn train_rejects_config_of_other_dimension() {
    let dir = scratch("cfg3d");
    fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("model.json");
    let text = r#"{"dim":3,"message_passing_steps":2,"history":2,"latent_width":8,"hidden_width":8,
        "hidden_layers":1,"use_controls":true,"loss":"g"}"#;
    fs::write(&cfg, text).unwrap();
    let out = run(&[
        "train",
        "--data",
        s(dataset()),
        "--config",
        s(&cfg),
        "--out",
        s(&dir.join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exploding_learning_rate_is_a_numerical_failure() {
    let out = run(&[
        "train",
        "--data",
        s(dataset()),
        "--k",
        "1",
        "--history",
        "2",
        "--width",
        "8",
        "--epochs",
        "3",
        "--lr",
        "1e38",
        "--samples-per-epoch",
        "4",
        "--out",
        s(&scratch("boom")),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oracle_rollout_has_zero_distance() {
    let out = scratch("oracle");
    ok(&[
        "rollout",
        "--oracle",
        "--history",
        "2",
        "--reference",
        s(dataset()),
        "--out",
        s(&out),
    ]);
    let m = json(&out.join("metrics.json"));
    let rows = m.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert_eq!(r["final_w2"], 0.0);
    }
}

#[test]
fn model_rollout_keeps_recorded_rigid_positions() {
    let out = scratch("rollout");
    ok(&[
        "rollout",
        "--checkpoint",
        s(checkpoint()),
        "--reference",
        s(dataset()),
        "--records",
        "0,1",
        "--out",
        s(&out),
    ]);
    let records = read_dataset(dataset()).unwrap();
    for idx in [0usize, 1] {
        let rec = &records[idx];
        let pred = read_points(&out.join(format!("rollout_{idx:04}.f32"))).unwrap();
        let per_frame = rec.frames[0].len();
        let history = 2;
        assert_eq!(pred.len(), per_frame * (rec.frames.len() - history));
        for (k, frame) in pred.chunks_exact(per_frame).enumerate() {
            let truth = &rec.frames[history + k];
            for (i, m) in rec.material.iter().enumerate() {
                if m.is_rigid() {
                    assert_eq!(
                        &frame[2 * i..2 * i + 2],
                        &truth[2 * i..2 * i + 2],
                        "record {idx} frame {k}"
                    );
                }
            }
        }
    }
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("metric,min,q1,median,q3,max,mean"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn rollout_rejects_records_shorter_than_history() {
    let out = run(&[
        "rollout",
        "--oracle",
        "--history",
        "8",
        "--reference",
        s(dataset()),
        "--out",
        s(&scratch("short")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ablation_emits_one_row_per_checkpoint() {
    let out = scratch("ablation1");
    ok(&[
        "ablation",
        "--checkpoint",
        s(checkpoint()),
        "--test",
        s(dataset()),
        "--out",
        s(&out),
    ]);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("model,min,q1,median,q3,max,mean"));
    let out = scratch("ablation2");
    let c = s(checkpoint());
    ok(&[
        "ablation",
        "--checkpoint",
        c,
        "--checkpoint",
        c,
        "--test",
        s(dataset()),
        "--records",
        "0,2",
        "--out",
        s(&out),
    ]);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(
        lines[1].split(',').skip(1).collect::<Vec<_>>(),
        lines[2].split(',').skip(1).collect::<Vec<_>>()
    );
}

#[test]
fn ablation_rejects_empty_test_set() {
    let only_special = scratch("special_only");
    ok(&[
        "gen-data",
        "--preset",
        "desk2d",
        "--sims",
        "2",
        "--horizon",
        "4",
        "--out",
        s(&only_special),
    ]);
    let out = run(&[
        "ablation",
        "--checkpoint",
        s(checkpoint()),
        "--test",
        s(&only_special),
        "--families-only",
        "--out",
        s(&scratch("ablation_empty")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ot_reports_exact_and_entropic_distances() {
    let dir = scratch("ot");
    fs::create_dir_all(&dir).unwrap();
    let a = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
    let b = [0.1, 0.0, 1.0, 0.2, 0.0, 1.3];
    write_points(&dir.join("a.f32"), &a).unwrap();
    write_points(&dir.join("b.f32"), &b).unwrap();
    ok(&[
        "ot",
        "--a",
        s(&dir.join("a.f32")),
        "--b",
        s(&dir.join("b.f32")),
        "--dim",
        "2",
        "--out",
        s(&dir.join("out")),
    ]);
    let r = json(&dir.join("out").join("ot.json"));
    let ra = read_points(&dir.join("a.f32")).unwrap();
    let rb = read_points(&dir.join("b.f32")).unwrap();
    let expect = exact_w2(&PointCloud::new(2, ra).unwrap(), &PointCloud::new(2, rb).unwrap()).unwrap();
    assert_eq!(r["exact_w2"].as_f64().unwrap(), expect);
    assert!(r["sinkhorn_divergence"]["value"].as_f64().unwrap() >= 0.0);
    write_points(&dir.join("c.f32"), &b[..4]).unwrap();
    ok(&[
        "ot",
        "--a",
        s(&dir.join("a.f32")),
        "--b",
        s(&dir.join("c.f32")),
        "--dim",
        "2",
        "--out",
        s(&dir.join("out2")),
    ]);
    assert!(json(&dir.join("out2").join("ot.json"))["exact_w2"].is_null());
}

#[test]
fn output_directory_holds_one_run() {
    let out = scratch("twice");
    ok(&[
        "rollout",
        "--oracle",
        "--history",
        "2",
        "--reference",
        s(dataset()),
        "--records",
        "0",
        "--out",
        s(&out),
    ]);
    let again = run(&[
        "rollout",
        "--oracle",
        "--history",
        "2",
        "--reference",
        s(dataset()),
        "--records",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn plan_smoke_run_emits_summary_and_plot() {
    let out = scratch("plan");
    ok(&[
        "plan",
        "--checkpoint",
        s(checkpoint()),
        "--initial",
        s(dataset()),
        "--record",
        "0",
        "--target-dataset",
        s(dataset()),
        "--target-record",
        "1",
        "--seeds",
        "1",
        "--iters",
        "1",
        "--population",
        "4",
        "--emit-plots",
        "--out",
        s(&out),
    ]);
    let summary = json(&out.join("summary.json"));
    let keys: Vec<&String> = summary.as_object().unwrap().keys().collect();
    assert_eq!(
        keys,
        [
            "s_initial_state",
            "s_initial_trajectory_end",
            "s_optimized_end_mean",
            "s_optimized_end_std"
        ]
    );
    assert!(summary
        .as_object()
        .unwrap()
        .values()
        .all(|v| v.as_f64().is_some_and(f64::is_finite)));
    let svg = fs::read_to_string(out.join("clouds.svg")).unwrap();
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains(r#"version="1.1""#));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<g>").count(), svg.matches("</g>").count());
    let traj = json(&out.join("trajectory.json"));
    assert_eq!(traj["actions"].as_array().unwrap().len(), 8);
    let records = read_dataset(dataset()).unwrap();
    let granular = records[0].material.iter().filter(|m| !m.is_rigid()).count();
    assert_eq!(read_points(&out.join("predicted.f32")).unwrap().len(), 2 * granular);
    let m = json(&out.join("run_manifest.json"));
    assert_eq!(m["seeds"], serde_json::json!([0]));
}

#[test]
fn plan_requires_a_target() {
    let out = run(&[
        "plan",
        "--checkpoint",
        s(checkpoint()),
        "--initial",
        s(dataset()),
        "--out",
        s(&scratch("notarget")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
