use granular_core::scene::{
    advance_frame, dem_step, init_scene, rigid_pose_apply, settle, CupShape, Material, ParticleState, Pose,
    RigidBodySpec, SceneConfig,
};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

fn single(cfg: &SceneConfig, p: &[f64]) -> ParticleState {
    ParticleState::new(cfg.dim, p.to_vec(), vec![Material::Granular])
}

fn small_cup() -> SceneConfig {
    let mut cfg = SceneConfig::desk_2d();
    cfg.cup = RigidBodySpec::new(
        CupShape::Box2d {
            inner_width: 0.03,
            inner_height: 0.06,
            wall_spacing: 0.005,
        },
        vec![0.0, 0.1],
    );
    cfg
}

#[test]
fn paper_scale_scene_has_1945_particles_70_percent_granular() {
    let cfg = SceneConfig::paper_3d();
    let s = init_scene(&cfg, 0).unwrap();
    assert_eq!(s.len(), 1945);
    let g = s.count(Material::Granular);
    assert!(((g as f64 / 1945.0) - 0.7).abs() < 0.005, "granular share {g}");
    assert!(s.velocities.iter().all(|&v| v == 0.0));
}

#[test]
fn zero_granular_request_yields_only_cup_particles() {
    let mut cfg = SceneConfig::desk_2d();
    cfg.granular_count = Some(0);
    let s = init_scene(&cfg, 1).unwrap();
    assert_eq!(s.count(Material::Granular), 0);
    assert_eq!(s.len(), cfg.cup.len());
    assert!(s.velocities.iter().all(|&v| v == 0.0));
}

#[test]
fn overfull_cup_is_a_configuration_error() {
    let mut cfg = small_cup();
    cfg.granular_count = Some(10_000);
    assert!(init_scene(&cfg, 0).is_err());
}

#[test]
fn desk_cup_fill_matches_independent_lattice_count() {
    // 3 × 6 cm interior, pitch 5.5 mm, 5.5 mm clearance; integer micrometers
    let (w, h, pitch) = (30_000i64, 60_000i64, 5_500i64);
    let mut count = 0;
    let mut y = pitch;
    while y <= h {
        let mut x = pitch;
        while x <= w - pitch {
            count += 1;
            x += pitch;
        }
        y += pitch;
    }
    let cfg = small_cup();
    let s = init_scene(&cfg, 3).unwrap();
    assert_eq!(s.count(Material::Granular), count);
    assert_eq!(count, 40);
}

#[test]
fn identity_action_leaves_cup_still() {
    let cfg = SceneConfig::desk_2d();
    let s = init_scene(&cfg, 0).unwrap();
    let out = rigid_pose_apply(&s, cfg.cup.initial_pose, &cfg.cup, cfg.dt);
    for i in s.indices_of(Material::Rigid) {
        for a in 0..2 {
            assert!((out.pos(i)[a] - s.pos(i)[a]).abs() < 1e-7);
        }
    }
    let again = rigid_pose_apply(&out, cfg.cup.initial_pose, &cfg.cup, cfg.dt);
    assert!(again.velocities.iter().all(|&v| v == 0.0));
    assert_eq!(again.positions, out.positions);
}

#[test]
fn pure_translation_shifts_every_cup_particle() {
    for cfg in [SceneConfig::desk_2d(), SceneConfig::paper_3d()] {
        let s = init_scene(&cfg, 0).unwrap();
        let a = rigid_pose_apply(&s, Pose::new(0.3, 0.02), &cfg.cup, cfg.dt);
        let b = rigid_pose_apply(&a, Pose::new(0.3, 0.03), &cfg.cup, cfg.dt);
        let axis = if cfg.dim == 2 { 0 } else { 1 };
        for i in s.indices_of(Material::Rigid) {
            for k in 0..cfg.dim {
                let expect = if k == axis { 0.01 } else { 0.0 };
                assert!((b.pos(i)[k] - a.pos(i)[k] - expect).abs() < 1e-12);
            }
        }
        for i in s.indices_of(Material::Granular) {
            assert_eq!(b.pos(i), s.pos(i));
        }
    }
}

proptest! {
    #[test]
    fn pose_application_is_invertible(theta in -2.8973f64..2.8973, y in -0.1f64..0.1) {
        let cfg = SceneConfig::paper_3d();
        let s = init_scene(&cfg, 0).unwrap();
        let start = rigid_pose_apply(&s, Pose::default(), &cfg.cup, cfg.dt);
        let moved = rigid_pose_apply(&start, Pose::new(theta, y), &cfg.cup, cfg.dt);
        let back = rigid_pose_apply(&moved, Pose::default(), &cfg.cup, cfg.dt);
        for (a, b) in back.positions.iter().zip(&start.positions) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(&back.material, &s.material);
    }
}

#[test]
fn free_fall_step_is_semi_implicit() {
    let cfg = SceneConfig::desk_2d();
    let s = single(&cfg, &[0.0, 0.1]);
    let n = dem_step(&s, &cfg).unwrap();
    let v = -cfg.gravity * cfg.dt;
    assert!((n.vel(0)[1] - v).abs() < 1e-12);
    assert!((n.pos(0)[1] - (0.1 + v * cfg.dt)).abs() < 1e-12);
    assert_eq!(n.vel(0)[0], 0.0);
    assert_eq!(n.t, 1);
}

#[test]
fn floor_equilibrium_overlap_holds_still() {
    let cfg = SceneConfig::desk_2d();
    let delta = cfg.particle_mass() * cfg.gravity / cfg.dem.stiffness;
    let y0 = cfg.particle_radius - delta;
    let mut s = single(&cfg, &[0.0, y0]);
    for _ in 0..100 {
        let n = dem_step(&s, &cfg).unwrap();
        assert!((n.pos(0)[1] - s.pos(0)[1]).abs() < 1e-8);
        s = n;
    }
}

#[test]
fn head_on_contact_is_symmetric() {
    let mut cfg = SceneConfig::desk_2d();
    cfg.gravity = 0.0;
    let r = cfg.particle_radius;
    let mut s = ParticleState::new(2, vec![-0.9 * r, 0.1, 0.9 * r, 0.1], vec![Material::Granular; 2]);
    s.velocities = vec![0.2, 0.0, -0.2, 0.0];
    let n = dem_step(&s, &cfg).unwrap();
    assert_eq!(n.vel(0)[0], -n.vel(1)[0]);
    assert_eq!(n.vel(0)[1], -n.vel(1)[1]);
    assert!(n.vel(0)[0] < 0.2);
}

#[test]
fn free_fall_energy_drift_is_small() {
    let cfg = SceneConfig::desk_2d();
    let m = cfg.particle_mass();
    let energy = |s: &ParticleState| 0.5 * m * s.vel(0)[1].powi(2) + m * cfg.gravity * s.pos(0)[1];
    let mut s = single(&cfg, &[0.0, 0.2]);
    for _ in 0..2000 {
        let n = dem_step(&s, &cfg).unwrap();
        let (e0, e1) = (energy(&s), energy(&n));
        assert!(((e1 - e0) / e0).abs() < 1e-6);
        s = n;
    }
}

#[test]
fn runaway_velocity_is_reported() {
    let cfg = SceneConfig::desk_2d();
    let mut s = single(&cfg, &[0.0, 0.1]);
    s.velocities = vec![2e3, 0.0];
    match dem_step(&s, &cfg) {
        Err(granular_core::Error::Instability { particle, .. }) => assert_eq!(particle, 0),
        other => panic!("expected instability, got {other:?}"),
    }
}

fn state_hash(s: &ParticleState) -> String {
    let mut h = Sha256::new();
    for x in s.positions.iter().chain(&s.velocities) {
        h.update(x.to_le_bytes());
    }
    format!("{:x}", h.finalize())
}

#[test]
fn frames_are_deterministic() {
    let cfg = SceneConfig::desk_2d();
    let run = || {
        let mut s = init_scene(&cfg, 11).unwrap();
        let mut pose = cfg.cup.initial_pose;
        for k in 0..3 {
            let next = Pose::new(0.05 * (k + 1) as f64, 0.001 * k as f64);
            s = advance_frame(&s, pose, next, &cfg).unwrap();
            pose = next;
        }
        s
    };
    let (a, b) = (run(), run());
    assert_eq!(state_hash(&a), state_hash(&b));
    assert_eq!(a.t, 3);
    // the cup ends exactly at the commanded pose
    let want = cfg.cup.world_points(Pose::new(0.05 * 3.0, 0.001 * 2.0));
    assert_eq!(a.positions_of(Material::Rigid), want);
}

#[test]
fn infinite_threshold_returns_input() {
    let cfg = SceneConfig::desk_2d();
    let s = init_scene(&cfg, 0).unwrap();
    let out = settle(&s, &cfg, f64::INFINITY).unwrap();
    assert_eq!(out.steps, 0);
    assert_eq!(out.state, s);
}

#[test]
fn dropped_pile_settles_inside_container() {
    let mut cfg = small_cup();
    cfg.dem.settle_max_steps = 400_000;
    let cup = init_scene(&cfg, 5).unwrap().retain_material(Material::Granular);
    // lower the block so its bottom layer starts 5 cm above the floor
    let lowest = cup.positions.chunks(2).map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let mut s = cup.clone();
    for p in s.positions.chunks_mut(2) {
        p[1] += 0.05 - lowest;
    }
    let thr = 1e-9 * s.len() as f64;
    let out = settle(&s, &cfg, thr).unwrap();
    assert!(!out.capped, "settle hit its step cap");
    assert!(out.steps > 0);
    assert!(out.state.granular_kinetic_energy(cfg.particle_mass()) < thr);
    for i in 0..out.state.len() {
        assert!(cfg.contains(out.state.pos(i), cfg.particle_radius));
    }
    // a pile at rest is returned as is
    let again = settle(&out.state, &cfg, thr).unwrap();
    assert_eq!(again.steps, 0);
    assert_eq!(again.state, out.state);
}
