use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use granular_core::datagen::{
    generate_dataset, generate_dataset_with, make_trajectory, read_dataset, read_manifest, replay, write_dataset,
    DatagenOptions, FamilyKind, FamilyRanges, Manifest, RecordKind, SimulationRecord, TrajectoryFamily,
};
use granular_core::scene::{init_scene, ActionBounds, Material, Pose, SceneConfig};
use granular_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const FRAME_DT: f64 = 0.01;

fn tiny_scene(horizon: usize) -> SceneConfig {
    let mut s = SceneConfig::desk_2d();
    s.granular_count = Some(12);
    s.dt = 1e-4;
    s.frame_stride = 50;
    s.horizon = horizon;
    s
}

#[test]
fn cosine_hold_reaches_peak_exactly_and_holds() {
    let mut f = TrajectoryFamily::quiet(FamilyKind::CosineHold);
    f.theta_max = 1.7;
    let a = make_trajectory(&f, 120, FRAME_DT, Pose::default(), &ActionBounds::default()).unwrap();
    let max = a.iter().map(|p| p.theta).fold(f64::MIN, f64::max);
    assert_eq!(max, 1.7);
    let held = a.iter().filter(|p| p.theta == 1.7).count();
    assert!(held >= 30, "held {held}");
    assert!(a.last().unwrap().theta.abs() < 1e-12);
    assert!(a.iter().all(|p| p.y == 0.0));
}

#[test]
fn zero_velocity_tilt_keeps_start_pose() {
    let mut f = TrajectoryFamily::quiet(FamilyKind::LinearTilt);
    f.theta_max = 2.0;
    let start = Pose::new(0.1, -0.02);
    let a = make_trajectory(&f, 40, FRAME_DT, start, &ActionBounds::default()).unwrap();
    assert!(a.iter().all(|&p| p == start));
}

#[test]
fn sinusoid_matches_sine_table() {
    let mut f = TrajectoryFamily::quiet(FamilyKind::Sinusoid);
    f.theta_max = 0.9;
    f.frequency_theta = 0.7;
    f.y_amplitude = -0.05;
    f.frequency_y = 0.3;
    let h = 150;
    let a = make_trajectory(&f, h, FRAME_DT, Pose::default(), &ActionBounds::default()).unwrap();
    for t in 1..=h {
        let time = t as f64 * FRAME_DT;
        let theta = 0.9 * (2.0 * PI * 0.7 * time).sin();
        let y = -0.05 * (2.0 * PI * 0.3 * time).sin();
        assert!((a[t - 1].theta - theta).abs() < 1e-12);
        assert!((a[t - 1].y - y).abs() < 1e-12);
    }
}

#[test]
fn linear_tilt_moves_at_constant_speed_both_ways() {
    let mut f = TrajectoryFamily::quiet(FamilyKind::LinearTilt);
    f.theta_max = 2.5;
    f.tilt_velocity = 1.5;
    f.direction = -1.0;
    let a = make_trajectory(&f, 80, FRAME_DT, Pose::default(), &ActionBounds::default()).unwrap();
    let mut prev = 0.0;
    for p in &a {
        assert!(((p.theta - prev).abs() - 0.015).abs() < 1e-12);
        prev = p.theta;
    }
    assert!((a[19].theta + 0.3).abs() < 1e-12);
    assert!((a[59].theta - 0.3).abs() < 1e-12);
    assert!(a[79].theta.abs() < 1e-12);
}

#[test]
fn noisy_linear_splits_horizon_in_thirds() {
    let mut f = TrajectoryFamily::quiet(FamilyKind::NoisyLinear);
    f.theta_max = 1.2;
    f.y_amplitude = 0.06;
    let a = make_trajectory(&f, 90, FRAME_DT, Pose::default(), &ActionBounds::default()).unwrap();
    assert!(a[..30].iter().all(|p| p.theta == 0.0));
    assert!((a[29].y - 0.06).abs() < 1e-15);
    assert!(a[30..60].iter().all(|p| p.y == 0.06));
    assert!((a[59].theta - 1.2).abs() < 1e-15);
    assert!(a[89].theta.abs() < 1e-15 && a[89].y.abs() < 1e-15);

    f.theta_noise = 0.05;
    f.y_noise = 1e-3;
    f.seed = 4;
    let noisy = make_trajectory(&f, 90, FRAME_DT, Pose::default(), &ActionBounds::default()).unwrap();
    assert_ne!(noisy, a);
}

#[test]
fn infeasible_family_parameters_are_rejected() {
    let b = ActionBounds::default();
    let mut f = TrajectoryFamily::quiet(FamilyKind::CosineHold);
    f.theta_max = 3.0;
    assert!(matches!(
        make_trajectory(&f, 50, FRAME_DT, Pose::default(), &b),
        Err(Error::Parameter(_))
    ));
    f.theta_max = 2.8;
    assert!(matches!(
        make_trajectory(&f, 1, FRAME_DT, Pose::default(), &b),
        Err(Error::Parameter(_))
    ));
    // a two-frame cosine ramp to 2.8 rad needs one 2.8 rad step
    assert!(matches!(
        make_trajectory(&f, 2, FRAME_DT, Pose::default(), &b),
        Err(Error::Parameter(_))
    ));
    let mut s = TrajectoryFamily::quiet(FamilyKind::Sinusoid);
    s.y_amplitude = 0.2;
    assert!(matches!(
        make_trajectory(&s, 50, FRAME_DT, Pose::default(), &b),
        Err(Error::Parameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn sampled_families_respect_bounds(seed in any::<u64>(), kind in 0usize..4, h in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ranges = FamilyRanges::default();
        ranges.theta_noise = (0.0, 0.5);
        ranges.y_noise = 0.01;
        let b = ActionBounds::default();
        let f = TrajectoryFamily::sample_feasible(FamilyKind::ALL[kind], &ranges, h, FRAME_DT, &b, &mut rng).unwrap();
        let a = make_trajectory(&f, h, FRAME_DT, Pose::default(), &b).unwrap();
        prop_assert_eq!(a.len(), h);
        prop_assert!(b.check(Pose::default(), &a).is_ok());
    }
}

#[test]
fn minimum_corpus_is_the_two_special_records() {
    let recs = generate_dataset(&tiny_scene(3), 2, 5).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(matches!(recs[0].kind, RecordKind::NoiseOnly { .. }));
    assert!(matches!(recs[1].kind, RecordKind::NoCup));
    assert_eq!(recs[1].material.iter().filter(|m| m.is_rigid()).count(), 0);
    assert!(recs[0].material.iter().any(|m| m.is_rigid()));
    assert!(matches!(generate_dataset(&tiny_scene(3), 1, 5), Err(Error::Config(_))));
}

#[test]
fn twenty_two_sims_give_twenty_family_records() {
    let recs = generate_dataset(&tiny_scene(2), 22, 1).unwrap();
    let fam = recs.iter().filter(|r| matches!(r.kind, RecordKind::Family(_))).count();
    assert_eq!((recs.len(), fam), (22, 20));
    let kinds: std::collections::HashSet<String> = recs[..20].iter().map(|r| r.kind.label()).collect();
    assert!(kinds.len() >= 3, "{kinds:?}");
}

fn hash_dir(dir: &Path) -> String {
    let mut names: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    let mut h = Sha256::new();
    for n in names {
        h.update(n.file_name().unwrap().to_string_lossy().as_bytes());
        h.update(fs::read(&n).unwrap());
    }
    format!("{:x}", h.finalize())
}

#[test]
fn records_replay_bit_exactly_and_files_are_deterministic() {
    let scene = tiny_scene(12);
    let recs = generate_dataset(&scene, 5, 9).unwrap();
    for r in &recs {
        assert_eq!(r.frames.len(), 13);
        assert_eq!(r.actions.len(), 12);
        let again = replay(r).unwrap();
        assert!(again
            .iter()
            .zip(&r.frames)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())));
        ActionBounds::default().check(r.start, &r.actions).unwrap();
        let g = r.state(0);
        assert!(g.velocities.iter().all(|&v| v == 0.0));
    }
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    write_dataset(&recs, d1.path()).unwrap();
    write_dataset(&generate_dataset(&scene, 5, 9).unwrap(), d2.path()).unwrap();
    assert_eq!(hash_dir(d1.path()), hash_dir(d2.path()));

    let back = read_dataset(d1.path()).unwrap();
    assert_eq!(back.len(), recs.len());
    for (a, b) in back.iter().zip(&recs) {
        assert_eq!(a, b);
    }
}

#[test]
fn restricted_family_options_are_honored() {
    let opts = DatagenOptions {
        families: vec![FamilyKind::Sinusoid],
        special_records: false,
        ..DatagenOptions::default()
    };
    let recs = generate_dataset_with(&tiny_scene(2), 3, 0, &opts).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r.kind.label() == "sinusoid"));
}

fn synthetic_record(config: &SceneConfig, frames: usize, seed: u64) -> SimulationRecord {
    let s = init_scene(config, seed).unwrap();
    SimulationRecord {
        config: {
            let mut c = config.clone();
            c.validate().unwrap();
            c
        },
        kind: RecordKind::NoCup,
        start: Pose::default(),
        actions: vec![Pose::default(); frames - 1],
        frames: vec![s.positions.clone(); frames],
        material: s.material,
    }
}

#[test]
fn manifest_shape_mismatch_is_reported() {
    let mut config = tiny_scene(3);
    config.granular_count = Some(3);
    let rec = synthetic_record(&config, 4, 0);
    let n = rec.num_particles();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&[rec], dir.path()).unwrap();
    let path = dir.path().join("manifest.json");
    let mut m: Manifest = read_manifest(dir.path()).unwrap();
    m.records[0].particles = n + 1;
    m.records[0].positions.bytes = (4 * (n + 1) * 2 * 4) as u64;
    m.records[0].material.bytes = (n + 1) as u64;
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Format(_))));

    m.records[0].particles = n;
    m.records[0].positions.bytes = (4 * n * 2 * 4) as u64;
    m.records[0].material.bytes = n as u64;
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    read_dataset(dir.path()).unwrap();

    let blob = dir.path().join(&m.records[0].positions.file);
    let mut bytes = fs::read(&blob).unwrap();
    bytes.truncate(bytes.len() - 8);
    fs::write(&blob, bytes).unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Format(_))));

    fs::write(&path, "{ not json").unwrap();
    assert!(matches!(read_dataset(dir.path()), Err(Error::Format(_))));
}

#[test]
fn paper_scale_files_match_declared_shapes() {
    let config = SceneConfig::paper_3d();
    let rec = synthetic_record(&config, 301, 1);
    assert_eq!(rec.num_particles(), 1945);
    assert_eq!(rec.material.iter().filter(|m| **m == Material::Granular).count(), 1361);
    let recs = vec![rec; 22];
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&recs, dir.path()).unwrap();
    let m = read_manifest(dir.path()).unwrap();
    assert_eq!(m.records.len(), 22);
    for e in &m.records {
        let len = fs::metadata(dir.path().join(&e.positions.file)).unwrap().len();
        assert_eq!(len, 301 * 1945 * 3 * 4);
        assert_eq!(e.positions.bytes, len);
        assert_eq!(fs::metadata(dir.path().join(&e.material.file)).unwrap().len(), 1945);
    }
}
