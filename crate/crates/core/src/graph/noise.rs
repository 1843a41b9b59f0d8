use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::scene::Material;

/// Adds random-walk noise to the granular positions of a history window.
///
/// Per-frame velocity increments are drawn from `N(0, σ²/C)` and summed,
/// so the final velocity perturbation has standard deviation `σ`. Position
/// noise is the running sum of those perturbations with the oldest frame
/// left untouched. Returns the noise of the newest frame, which the caller
/// adds to the next-frame target.
pub fn add_training_noise<R: Rng + ?Sized>(
    history: &mut [Vec<f64>],
    material: &[Material],
    dim: usize,
    sigma: f64,
    rng: &mut R,
) -> Vec<f64> {
    let len = history.first().map_or(0, |h| h.len());
    let mut noise = vec![0.0; len];
    let steps = history.len().saturating_sub(1);
    if sigma <= 0.0 || steps == 0 {
        return noise;
    }
    let normal = Normal::new(0.0, sigma / (steps as f64).sqrt()).expect("finite sigma");
    let mut vel = vec![0.0; len];
    for frame in history.iter_mut().skip(1) {
        for (i, m) in material.iter().enumerate() {
            if *m != Material::Granular {
                continue;
            }
            for a in 0..dim {
                let k = i * dim + a;
                vel[k] += normal.sample(rng);
                noise[k] += vel[k];
                frame[k] += noise[k];
            }
        }
    }
    noise
}
