use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Granular,
    Rigid,
}

impl Material {
    pub fn tag(self) -> u8 {
        match self {
            Material::Granular => 0,
            Material::Rigid => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Material::Granular),
            1 => Some(Material::Rigid),
            _ => None,
        }
    }

    pub fn is_rigid(self) -> bool {
        self == Material::Rigid
    }
}

/// Positions, velocities and material tags of every particle at one step.
///
/// Coordinates are stored flat, `dim` values per particle.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    pub dim: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub material: Vec<Material>,
    pub t: usize,
}

impl ParticleState {
    pub fn new(dim: usize, positions: Vec<f64>, material: Vec<Material>) -> Self {
        assert_eq!(
            positions.len(),
            dim * material.len(),
            "positions/material length mismatch"
        );
        let velocities = vec![0.0; positions.len()];
        ParticleState {
            dim,
            positions,
            velocities,
            material,
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.material.len()
    }

    pub fn is_empty(&self) -> bool {
        self.material.is_empty()
    }

    pub fn pos(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vel(&self, i: usize) -> &[f64] {
        &self.velocities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn indices_of(&self, m: Material) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.material[i] == m).collect()
    }

    pub fn count(&self, m: Material) -> usize {
        self.material.iter().filter(|&&x| x == m).count()
    }

    /// Flat coordinates of all particles of one material, in index order.
    pub fn positions_of(&self, m: Material) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            if self.material[i] == m {
                out.extend_from_slice(self.pos(i));
            }
        }
        out
    }

    /// Kinetic energy of the granular particles for a per-particle mass.
    pub fn granular_kinetic_energy(&self, mass: f64) -> f64 {
        (0..self.len())
            .filter(|&i| self.material[i] == Material::Granular)
            .map(|i| 0.5 * mass * self.vel(i).iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Keeps only the particles of one material.
    pub fn retain_material(&self, m: Material) -> ParticleState {
        let keep = self.indices_of(m);
        let mut positions = Vec::with_capacity(keep.len() * self.dim);
        let mut velocities = Vec::with_capacity(keep.len() * self.dim);
        for &i in &keep {
            positions.extend_from_slice(self.pos(i));
            velocities.extend_from_slice(self.vel(i));
        }
        ParticleState {
            dim: self.dim,
            positions,
            velocities,
            material: vec![m; keep.len()],
            t: self.t,
        }
    }

    /// Velocities zeroed and positions rounded to `f32`, so the state is
    /// reproduced exactly by the on-disk dataset format.
    pub fn quiesced(&self) -> ParticleState {
        let mut s = self.clone();
        s.positions.iter_mut().for_each(|x| *x = *x as f32 as f64);
        s.velocities.iter_mut().for_each(|v| *v = 0.0);
        s
    }
}
