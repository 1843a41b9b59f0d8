use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::SceneConfig;
use super::rigid::CupShape;
use super::state::{Material, ParticleState};
use crate::error::{Error, Result};

/// Lattice pitch between granular particle centers, in radii.
pub const LATTICE_SPACING: f64 = 2.2;
/// Uniform jitter applied to lattice sites, in radii.
pub const LATTICE_JITTER: f64 = 0.05;

/// Candidate granular sites inside the cup in its local frame, bottom layer
/// first. Sites keep one lattice pitch from the wall center lines.
pub fn lattice_sites(shape: &CupShape, particle_radius: f64) -> Vec<f64> {
    let s = LATTICE_SPACING * particle_radius;
    let c = s;
    let mut sites = Vec::new();
    match *shape {
        CupShape::Box2d {
            inner_width,
            inner_height,
            ..
        } => {
            let x0 = -inner_width / 2.0 + c;
            let cols = ((inner_width - 2.0 * c) / s + 1e-9).floor();
            let rows = ((inner_height - c) / s + 1e-9).floor();
            if cols < 0.0 || rows < 0.0 {
                return sites;
            }
            for k in 0..=rows as usize {
                for i in 0..=cols as usize {
                    let p = [x0 + i as f64 * s, c + k as f64 * s];
                    if shape.interior_contains(&p, c) {
                        sites.extend(p);
                    }
                }
            }
        }
        CupShape::Cylinder { diameter, height, .. } => {
            let reach = ((diameter / 2.0 - c) / s).floor() as i64;
            let layers = ((height - c) / s + 1e-9).floor();
            if reach < 0 || layers < 0.0 {
                return sites;
            }
            for k in 0..=layers as usize {
                for j in -reach..=reach {
                    for i in -reach..=reach {
                        let p = [i as f64 * s, j as f64 * s, c + k as f64 * s];
                        if shape.interior_contains(&p, c) {
                            sites.extend(p);
                        }
                    }
                }
            }
        }
    }
    sites
}

/// Builds the resting initial state: granular particles on a jittered
/// lattice inside the cup (filled bottom-up), followed by the cup particles
/// at the initial pose. Positions are rounded to `f32`.
pub fn init_scene(config: &SceneConfig, seed: u64) -> Result<ParticleState> {
    let mut config = config.clone();
    config.validate()?;
    let d = config.dim;
    let sites = lattice_sites(&config.cup.shape, config.particle_radius);
    let capacity = sites.len() / d;
    let count = config.granular_count.unwrap_or(capacity);
    if count > capacity {
        return Err(Error::Config(format!(
            "cup holds {capacity} granular particles, {count} requested"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = LATTICE_JITTER * config.particle_radius;
    let pose = config.cup.initial_pose;
    let mut positions = Vec::with_capacity((count + config.cup.len()) * d);
    let mut local = [0.0; 3];
    let mut world = [0.0; 3];
    for site in sites.chunks_exact(d).take(count) {
        for a in 0..d {
            local[a] = site[a] + rng.random_range(-jitter..=jitter);
        }
        config.cup.to_world(&local[..d], pose, &mut world[..d]);
        positions.extend_from_slice(&world[..d]);
    }
    positions.extend(config.cup.world_points(pose));
    let mut material = vec![Material::Granular; count];
    material.resize(positions.len() / d, Material::Rigid);
    Ok(ParticleState::new(d, positions, material).quiesced())
}
