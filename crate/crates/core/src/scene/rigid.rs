use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::{Material, ParticleState};

/// Absolute cup pose: rotation about the rotation axis and translation along
/// the motion axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub theta: f64,
    pub y: f64,
}

impl Pose {
    pub fn new(theta: f64, y: f64) -> Self {
        Pose { theta, y }
    }

    pub fn lerp(self, other: Pose, s: f64) -> Pose {
        Pose {
            theta: self.theta + (other.theta - self.theta) * s,
            y: self.y + (other.y - self.y) * s,
        }
    }
}

/// Geometric description from which cup surface particles are sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CupShape {
    /// 2D open rectangle: bottom and two side walls of particles.
    Box2d {
        inner_width: f64,
        inner_height: f64,
        wall_spacing: f64,
    },
    /// 3D open cylinder: bottom disk and side wall, `count` particles total.
    Cylinder { diameter: f64, height: f64, count: usize },
}

impl CupShape {
    pub fn dim(&self) -> usize {
        match self {
            CupShape::Box2d { .. } => 2,
            CupShape::Cylinder { .. } => 3,
        }
    }

    pub fn height(&self) -> f64 {
        match *self {
            CupShape::Box2d { inner_height, .. } => inner_height,
            CupShape::Cylinder { height, .. } => height,
        }
    }

    /// Whether a local-frame point lies in the fillable interior, keeping
    /// `clearance` from the wall center lines.
    pub fn interior_contains(&self, p: &[f64], clearance: f64) -> bool {
        let tol = 1e-12;
        match *self {
            CupShape::Box2d {
                inner_width,
                inner_height,
                ..
            } => {
                let half = inner_width / 2.0 - clearance;
                p[0].abs() <= half + tol && p[1] >= clearance - tol && p[1] <= inner_height + tol
            }
            CupShape::Cylinder { diameter, height, .. } => {
                let r = diameter / 2.0 - clearance;
                (p[0] * p[0] + p[1] * p[1]).sqrt() <= r + tol && p[2] >= clearance - tol && p[2] <= height + tol
            }
        }
    }

    /// Samples surface particles in the local frame (cup bottom at the
    /// origin plane, mouth at `height`). Deterministic given the seed.
    pub fn sample_surface(&self, seed: u64, jitter: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jit = |x: f64| {
            if jitter > 0.0 {
                x + rng.random_range(-jitter..jitter)
            } else {
                x
            }
        };
        let mut pts = Vec::new();
        match *self {
            CupShape::Box2d {
                inner_width,
                inner_height,
                wall_spacing,
            } => {
                let half = inner_width / 2.0;
                let nb = (inner_width / wall_spacing).ceil().max(1.0) as usize;
                for k in 0..=nb {
                    let x = -half + inner_width * k as f64 / nb as f64;
                    pts.extend([jit(x), 0.0]);
                }
                let ns = (inner_height / wall_spacing).ceil().max(1.0) as usize;
                for side in [-1.0, 1.0] {
                    for k in 1..=ns {
                        let y = inner_height * k as f64 / ns as f64;
                        pts.extend([side * half, jit(y)]);
                    }
                }
            }
            CupShape::Cylinder {
                diameter,
                height,
                count,
            } => {
                let rad = diameter / 2.0;
                let bottom_area = PI * rad * rad;
                let side_area = 2.0 * PI * rad * height;
                let n_bottom = ((count as f64) * bottom_area / (bottom_area + side_area)).round() as usize;
                let n_side = count - n_bottom.min(count);
                // sunflower spiral on the disk
                let golden = PI * (3.0 - 5f64.sqrt());
                for k in 0..n_bottom {
                    let r = rad * ((k as f64 + 0.5) / n_bottom as f64).sqrt();
                    let a = golden * k as f64;
                    pts.extend([jit(r * a.cos()), jit(r * a.sin()), 0.0]);
                }
                // rings on the side, as square a layout as the count allows
                let ratio = height / (2.0 * PI * rad);
                let rings = ((n_side as f64 * ratio).sqrt().round() as usize).clamp(1, n_side.max(1));
                for ring in 0..rings {
                    let m = n_side / rings + usize::from(ring < n_side % rings);
                    let z = height * (ring as f64 + 0.5) / rings as f64;
                    for idx in 0..m {
                        let a = 2.0 * PI * (idx as f64 + 0.5 * (ring % 2) as f64) / m as f64;
                        pts.extend([rad * a.cos(), rad * a.sin(), jit(z)]);
                    }
                }
            }
        }
        pts
    }
}

/// The controlled cup, described in its local frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodySpec {
    pub shape: CupShape,
    /// Local-frame surface particles; sampled from `shape` when left empty.
    #[serde(default)]
    pub surface_points: Vec<f64>,
    /// Rotation center in the local frame; defaults to the mouth centroid.
    #[serde(default)]
    pub pivot: Vec<f64>,
    /// World position of the pivot at pose `(0, 0)`.
    pub anchor: Vec<f64>,
    #[serde(default)]
    pub initial_pose: Pose,
    #[serde(default)]
    pub seed: u64,
    /// Uniform jitter amplitude applied while sampling, meters.
    #[serde(default)]
    pub jitter: f64,
}

impl RigidBodySpec {
    pub fn new(shape: CupShape, anchor: Vec<f64>) -> Self {
        let mut spec = RigidBodySpec {
            shape,
            surface_points: Vec::new(),
            pivot: Vec::new(),
            anchor,
            initial_pose: Pose::default(),
            seed: 0,
            jitter: 0.0,
        };
        spec.resolve();
        spec
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn len(&self) -> usize {
        self.surface_points.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_points.is_empty()
    }

    /// Fills in defaults that depend on the shape.
    pub fn resolve(&mut self) {
        let d = self.dim();
        if self.surface_points.is_empty() {
            self.surface_points = self.shape.sample_surface(self.seed, self.jitter);
        }
        if self.pivot.is_empty() {
            let mut p = vec![0.0; d];
            p[d - 1] = self.shape.height();
            self.pivot = p;
        }
    }

    /// Maps a local point to world coordinates at `pose`.
    pub fn to_world(&self, local: &[f64], pose: Pose, out: &mut [f64]) {
        let (s, c) = pose.theta.sin_cos();
        match self.dim() {
            2 => {
                let (u, v) = (local[0] - self.pivot[0], local[1] - self.pivot[1]);
                out[0] = self.anchor[0] + c * u - s * v + pose.y;
                out[1] = self.anchor[1] + s * u + c * v;
            }
            _ => {
                let (u, v, w) = (
                    local[0] - self.pivot[0],
                    local[1] - self.pivot[1],
                    local[2] - self.pivot[2],
                );
                out[0] = self.anchor[0] + u;
                out[1] = self.anchor[1] + c * v - s * w + pose.y;
                out[2] = self.anchor[2] + s * v + c * w;
            }
        }
    }

    /// Inverse of [`to_world`](Self::to_world).
    pub fn to_local(&self, world: &[f64], pose: Pose, out: &mut [f64]) {
        let (s, c) = pose.theta.sin_cos();
        match self.dim() {
            2 => {
                let (u, v) = (world[0] - self.anchor[0] - pose.y, world[1] - self.anchor[1]);
                out[0] = self.pivot[0] + c * u + s * v;
                out[1] = self.pivot[1] - s * u + c * v;
            }
            _ => {
                let (u, v, w) = (
                    world[0] - self.anchor[0],
                    world[1] - self.anchor[1] - pose.y,
                    world[2] - self.anchor[2],
                );
                out[0] = self.pivot[0] + u;
                out[1] = self.pivot[1] + c * v + s * w;
                out[2] = self.pivot[2] - s * v + c * w;
            }
        }
    }

    /// World coordinates of every surface point at `pose`.
    pub fn world_points(&self, pose: Pose) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; self.surface_points.len()];
        for (src, dst) in self.surface_points.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.to_world(src, pose, dst);
        }
        out
    }
}

/// Moves the rigid particles kinematically to `pose`.
///
/// Rigid particles are assumed to be the state's rigid-tagged particles in
/// surface-point order. Their velocities become `(new − old) / dt`; granular
/// particles are untouched.
pub fn rigid_pose_apply(state: &ParticleState, pose: Pose, spec: &RigidBodySpec, dt: f64) -> ParticleState {
    let mut out = state.clone();
    set_rigid_pose(&mut out, pose, spec, dt);
    out
}

pub(crate) fn set_rigid_pose(state: &mut ParticleState, pose: Pose, spec: &RigidBodySpec, dt: f64) {
    let d = state.dim;
    let mut k = 0;
    let mut buf = [0.0; 3];
    for i in 0..state.len() {
        if state.material[i] != Material::Rigid {
            continue;
        }
        spec.to_world(&spec.surface_points[k * d..(k + 1) * d], pose, &mut buf[..d]);
        for a in 0..d {
            let old = state.positions[i * d + a];
            state.positions[i * d + a] = buf[a];
            state.velocities[i * d + a] = (buf[a] - old) / dt;
        }
        k += 1;
    }
    debug_assert!(
        k == 0 || k == spec.len(),
        "rigid particle count differs from the cup spec"
    );
}
