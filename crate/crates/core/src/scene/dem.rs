//! Spring-dashpot discrete-element integrator used as the ground-truth oracle.

use super::config::SceneConfig;
use super::rigid::{set_rigid_pose, Pose};
use super::state::ParticleState;
use crate::error::{Error, Result};
use crate::graph::neighbors::CellList;

/// Precomputed contact coefficients for one configuration.
struct Contact {
    dim: usize,
    radius: f64,
    mass: f64,
    k: f64,
    mu: f64,
    gamma_pair: f64,
    gamma_single: f64,
    gravity: f64,
}

impl Contact {
    fn new(config: &SceneConfig) -> Self {
        let mass = config.particle_mass();
        let k = config.dem.stiffness;
        let crit = |m_eff: f64| 2.0 * (k * m_eff).sqrt();
        Contact {
            dim: config.dim,
            radius: config.particle_radius,
            mass,
            k,
            mu: config.dem.friction,
            gamma_pair: config.dem.damping_ratio * crit(mass / 2.0),
            gamma_single: config.dem.damping_ratio * crit(mass),
            gravity: config.gravity,
        }
    }

    /// Force on the body whose surface normal points along `n`, given the
    /// overlap and the velocity of that body relative to the other.
    fn force(&self, n: &[f64], overlap: f64, v_rel: &[f64], gamma: f64, out: &mut [f64]) -> bool {
        let d = self.dim;
        let vn: f64 = (0..d).map(|a| v_rel[a] * n[a]).sum();
        let fn_mag = self.k * overlap - gamma * vn;
        if fn_mag <= 0.0 {
            return false;
        }
        let mut vt = [0.0; 3];
        let mut vt2 = 0.0;
        for a in 0..d {
            vt[a] = v_rel[a] - vn * n[a];
            vt2 += vt[a] * vt[a];
        }
        let vt_mag = vt2.sqrt();
        let ft_mag = (gamma * vt_mag).min(self.mu * fn_mag);
        for a in 0..d {
            out[a] = fn_mag * n[a];
            if vt_mag > 0.0 {
                out[a] -= ft_mag * vt[a] / vt_mag;
            }
        }
        true
    }
}

/// Reusable buffers for repeated stepping.
#[derive(Default)]
struct Scratch {
    forces: Vec<f64>,
}

fn step_in_place(
    state: &mut ParticleState,
    config: &SceneConfig,
    contact: &Contact,
    scratch: &mut Scratch,
    step: usize,
) -> Result<()> {
    let d = state.dim;
    let n = state.len();
    let down = config.down_axis();
    let f = &mut scratch.forces;
    f.clear();
    f.resize(n * d, 0.0);

    let reach = 2.0 * contact.radius;
    let grid = CellList::new(&state.positions, d, reach);
    let mut nrm = [0.0; 3];
    let mut vrel = [0.0; 3];
    let mut fc = [0.0; 3];
    for i in 0..n {
        let rigid_i = state.material[i].is_rigid();
        let positions = &state.positions;
        grid.for_each_neighbor(positions, i, reach, |j, d2| {
            if j <= i || (rigid_i && state.material[j].is_rigid()) || d2 == 0.0 {
                return;
            }
            let dist = d2.sqrt();
            for a in 0..d {
                // normal from j towards i
                nrm[a] = (positions[i * d + a] - positions[j * d + a]) / dist;
                vrel[a] = state.velocities[i * d + a] - state.velocities[j * d + a];
            }
            let gamma = if rigid_i || state.material[j].is_rigid() {
                contact.gamma_single
            } else {
                contact.gamma_pair
            };
            if contact.force(&nrm[..d], reach - dist, &vrel[..d], gamma, &mut fc[..d]) {
                for a in 0..d {
                    f[i * d + a] += fc[a];
                    f[j * d + a] -= fc[a];
                }
            }
        });
    }

    let walls = config.walls();
    for i in 0..n {
        if state.material[i].is_rigid() {
            continue;
        }
        for &w in &walls {
            let gap = config.wall_distance(state.pos(i), w);
            let overlap = contact.radius - gap;
            if overlap <= 0.0 {
                continue;
            }
            let mut n_in = [0.0; 3];
            n_in[w.axis] = if w.lower { 1.0 } else { -1.0 };
            if contact.force(&n_in[..d], overlap, state.vel(i), contact.gamma_single, &mut fc[..d]) {
                for a in 0..d {
                    f[i * d + a] += fc[a];
                }
            }
        }
    }

    let dt = config.dt;
    let inv_m = 1.0 / contact.mass;
    let limit = config.dem.max_speed;
    for i in 0..n {
        if state.material[i].is_rigid() {
            continue;
        }
        let mut speed2 = 0.0;
        for a in 0..d {
            let g = if a == down { contact.gravity } else { 0.0 };
            let v = state.velocities[i * d + a] + (f[i * d + a] * inv_m - g) * dt;
            state.velocities[i * d + a] = v;
            state.positions[i * d + a] += v * dt;
            speed2 += v * v;
        }
        if !(speed2.sqrt() <= limit) {
            return Err(Error::Instability {
                particle: i,
                speed: speed2.sqrt(),
                step,
            });
        }
    }
    Ok(())
}

/// Advances granular particles by one contact step `config.dt`.
///
/// Rigid particles keep their positions and velocities; they push granular
/// particles but never recoil. The returned state has `t` incremented.
pub fn dem_step(state: &ParticleState, config: &SceneConfig) -> Result<ParticleState> {
    let mut out = state.clone();
    let contact = Contact::new(config);
    step_in_place(&mut out, config, &contact, &mut Scratch::default(), state.t)?;
    out.t += 1;
    Ok(out)
}

/// Advances one recorded frame: `frame_stride` contact steps while the cup
/// moves linearly from pose `from` to pose `to`.
///
/// The rigid particles finish exactly at `to`. `t` counts frames.
pub fn advance_frame(state: &ParticleState, from: Pose, to: Pose, config: &SceneConfig) -> Result<ParticleState> {
    let mut out = state.clone();
    let contact = Contact::new(config);
    let mut scratch = Scratch::default();
    let stride = config.frame_stride;
    for s in 1..=stride {
        let pose = if s == stride {
            to
        } else {
            from.lerp(to, s as f64 / stride as f64)
        };
        set_rigid_pose(&mut out, pose, &config.cup, config.dt);
        step_in_place(&mut out, config, &contact, &mut scratch, state.t * stride + s - 1)?;
    }
    out.t += 1;
    Ok(out)
}

/// Result of [`settle`].
#[derive(Clone, Debug)]
pub struct Settled {
    pub state: ParticleState,
    /// Contact steps taken before the returned state.
    pub steps: usize,
    /// Set when the step cap was reached before the pile came to rest.
    pub capped: bool,
}

/// Steps the contact model with the cup held still until the granular
/// kinetic energy stays below `ke_threshold` for a full frame.
///
/// The returned state is the first one of that quiet window, so a pile that
/// is already at rest comes back unchanged after zero steps.
pub fn settle(state: &ParticleState, config: &SceneConfig, ke_threshold: f64) -> Result<Settled> {
    if ke_threshold == f64::INFINITY {
        return Ok(Settled {
            state: state.clone(),
            steps: 0,
            capped: false,
        });
    }
    let mass = config.particle_mass();
    let window = config.frame_stride.max(1);
    let mut cur = state.clone();
    for (v, m) in cur.velocities.chunks_exact_mut(cur.dim).zip(&cur.material) {
        if m.is_rigid() {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let contact = Contact::new(config);
    let mut scratch = Scratch::default();
    let mut quiet: Option<(ParticleState, usize)> = if cur.granular_kinetic_energy(mass) < ke_threshold {
        Some((state.clone(), 0))
    } else {
        None
    };
    for step in 1..=config.dem.settle_max_steps {
        step_in_place(&mut cur, config, &contact, &mut scratch, step - 1)?;
        if cur.granular_kinetic_energy(mass) < ke_threshold {
            match &quiet {
                Some((_, start)) if step - start >= window => {
                    let (s, start) = quiet.take().expect("quiet window present");
                    return Ok(Settled {
                        state: s,
                        steps: start,
                        capped: false,
                    });
                }
                Some(_) => {}
                None => quiet = Some((cur.clone(), step)),
            }
        } else {
            quiet = None;
        }
    }
    Ok(Settled {
        state: cur,
        steps: config.dem.settle_max_steps,
        capped: true,
    })
}
