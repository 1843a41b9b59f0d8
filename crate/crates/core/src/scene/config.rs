use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rigid::{CupShape, RigidBodySpec};
use crate::error::{Error, Result};

/// Contact model parameters of the discrete-element oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemParams {
    /// Normal spring stiffness k_n, N/m.
    pub stiffness: f64,
    /// Normal damping as a fraction of critical damping.
    pub damping_ratio: f64,
    /// Coulomb friction coefficient μ.
    pub friction: f64,
    /// Material density used to derive particle mass, kg/m³.
    pub density: f64,
    /// Speed above which a step is reported as unstable, m/s.
    pub max_speed: f64,
    /// Step cap for `settle`.
    pub settle_max_steps: usize,
}

impl Default for DemParams {
    fn default() -> Self {
        DemParams {
            stiffness: 1e4,
            damping_ratio: 0.3,
            friction: 0.5,
            density: 1500.0,
            max_speed: 1e3,
            settle_max_steps: 200_000,
        }
    }
}

/// A closed container face: `lower` faces sit at the minimum of `axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Wall {
    pub axis: usize,
    pub lower: bool,
}

/// Scene description: container, cup, material and time stepping.
///
/// The container spans `[-L/2, L/2]` on horizontal axes and `[0, L]` on the
/// down axis (last axis), shifted by `container_offset`. Its top face is open.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub dim: usize,
    pub container_extents: Vec<f64>,
    #[serde(default)]
    pub container_offset: Vec<f64>,
    /// Contact-simulation step, seconds.
    pub dt: f64,
    /// Simulation steps per recorded frame (one action per frame).
    #[serde(default = "one")]
    pub frame_stride: usize,
    pub gravity: f64,
    pub connectivity_radius: f64,
    pub particle_radius: f64,
    pub cup: RigidBodySpec,
    /// Frames per recorded simulation.
    pub horizon: usize,
    /// Granular particles to place in the cup; `None` fills every lattice site.
    #[serde(default)]
    pub granular_count: Option<usize>,
    #[serde(default)]
    pub dem: DemParams,
}

fn one() -> usize {
    1
}

impl SceneConfig {
    /// Small 2D scene sized for laptop-scale training and planning.
    pub fn desk_2d() -> Self {
        SceneConfig {
            dim: 2,
            container_extents: vec![0.3, 0.25],
            container_offset: vec![0.0, 0.0],
            dt: 2e-5,
            frame_stride: 500,
            gravity: 9.81,
            connectivity_radius: 0.0125,
            particle_radius: 0.0025,
            cup: RigidBodySpec::new(
                CupShape::Box2d {
                    inner_width: 0.05,
                    inner_height: 0.14,
                    wall_spacing: 0.005,
                },
                vec![0.0, 0.17],
            ),
            horizon: 120,
            granular_count: None,
            dem: DemParams::default(),
        }
    }

    /// 3D scene with the box, cup and particle budget of the original setup.
    pub fn paper_3d() -> Self {
        SceneConfig {
            dim: 3,
            container_extents: vec![0.1, 0.2, 0.2],
            container_offset: vec![0.0; 3],
            dt: 2e-5,
            frame_stride: 500,
            gravity: 9.81,
            connectivity_radius: 0.015,
            particle_radius: 0.0025,
            cup: RigidBodySpec::new(
                CupShape::Cylinder {
                    diameter: 0.07,
                    height: 0.1,
                    count: 584,
                },
                vec![0.0, 0.0, 0.22],
            ),
            horizon: 300,
            granular_count: Some(1361),
            dem: DemParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: SceneConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks invariants and fills derived defaults (cup sampling, offset).
    pub fn validate(&mut self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dim == 2 || self.dim == 3) {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.container_extents.len() != self.dim || self.container_extents.iter().any(|&l| !(l > 0.0)) {
            return bad("container_extents needs one positive length per axis".into());
        }
        if self.container_offset.is_empty() {
            self.container_offset = vec![0.0; self.dim];
        }
        if self.container_offset.len() != self.dim {
            return bad("container_offset needs one value per axis".into());
        }
        if !(self.dt > 0.0) || self.frame_stride == 0 {
            return bad("dt and frame_stride must be positive".into());
        }
        if !(self.connectivity_radius > 0.0) || !(self.particle_radius > 0.0) {
            return bad("radii must be positive".into());
        }
        if self.particle_radius >= self.connectivity_radius {
            return bad("particle_radius must be below the connectivity radius".into());
        }
        if !(self.gravity >= 0.0) {
            return bad("gravity must be non-negative".into());
        }
        if self.cup.dim() != self.dim || self.cup.anchor.len() != self.dim {
            return bad("cup geometry does not match the scene dimension".into());
        }
        self.cup.resolve();
        if self.cup.pivot.len() != self.dim || self.cup.surface_points.len() % self.dim != 0 {
            return bad("cup pivot or surface points have the wrong dimension".into());
        }
        Ok(())
    }

    pub fn down_axis(&self) -> usize {
        self.dim - 1
    }

    /// Time between recorded frames.
    pub fn frame_dt(&self) -> f64 {
        self.dt * self.frame_stride as f64
    }

    pub fn particle_mass(&self) -> f64 {
        4.0 / 3.0 * PI * self.particle_radius.powi(3) * self.dem.density
    }

    fn offset(&self, axis: usize) -> f64 {
        self.container_offset.get(axis).copied().unwrap_or(0.0)
    }

    pub fn container_min(&self, axis: usize) -> f64 {
        let l = self.container_extents[axis];
        if axis == self.down_axis() {
            self.offset(axis)
        } else {
            self.offset(axis) - l / 2.0
        }
    }

    pub fn container_max(&self, axis: usize) -> f64 {
        self.container_min(axis) + self.container_extents[axis]
    }

    /// Closed faces in feature order: per axis the lower then the upper
    /// face, skipping the open top. `2·dim − 1` walls.
    pub fn walls(&self) -> Vec<Wall> {
        let mut w = Vec::with_capacity(2 * self.dim - 1);
        for axis in 0..self.dim {
            w.push(Wall { axis, lower: true });
            if axis != self.down_axis() {
                w.push(Wall { axis, lower: false });
            }
        }
        w
    }

    /// Signed distance from a point to a wall plane, positive inside.
    pub fn wall_distance(&self, p: &[f64], wall: Wall) -> f64 {
        if wall.lower {
            p[wall.axis] - self.container_min(wall.axis)
        } else {
            self.container_max(wall.axis) - p[wall.axis]
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.container_extents.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    /// Whether a particle center is inside the closed walls, allowing
    /// `slack` of penetration. Height above the open top is unbounded.
    pub fn contains(&self, p: &[f64], slack: f64) -> bool {
        self.walls().iter().all(|&w| self.wall_distance(p, w) >= -slack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_survive_json() {
        for cfg in [SceneConfig::desk_2d(), SceneConfig::paper_3d()] {
            let back = SceneConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(cfg.walls().len(), 2 * cfg.dim - 1);
        }
    }

    #[test]
    fn rejects_particle_radius_at_connectivity_radius() {
        let mut cfg = SceneConfig::desk_2d();
        cfg.particle_radius = cfg.connectivity_radius;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_dimension() {
        let mut cfg = SceneConfig::desk_2d();
        cfg.dim = 4;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn paper_box_is_open_topped() {
        let cfg = SceneConfig::paper_3d();
        assert_eq!(cfg.container_min(2), 0.0);
        assert_eq!(cfg.container_max(1), 0.1);
        assert!(!cfg.walls().contains(&Wall { axis: 2, lower: false }));
        assert!(cfg.contains(&[0.0, 0.0, 5.0], 0.0));
    }
}
