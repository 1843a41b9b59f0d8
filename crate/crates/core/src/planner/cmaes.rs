use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariance eigenvalues are floored here; anything worse triggers a reset.
pub const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesOptions {
    /// Offspring per generation λ; `None` uses `4 + ⌊3 ln n⌋`.
    pub population: Option<usize>,
    pub max_generations: usize,
    pub max_evaluations: usize,
    /// Stop once the best value drops below this.
    pub target: f64,
    pub seed: u64,
}

impl Default for CmaesOptions {
    fn default() -> Self {
        CmaesOptions {
            population: None,
            max_generations: usize::MAX,
            max_evaluations: 100_000,
            target: f64::NEG_INFINITY,
            seed: 0,
        }
    }
}

/// Per-generation record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub evaluations: usize,
    /// Best value of this generation's offspring.
    pub generation_best: f64,
    /// Best value seen so far.
    pub best: f64,
    pub sigma: f64,
    /// The covariance was reset to the identity this generation.
    pub covariance_reset: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmaesResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationLog>,
}

/// Evolution state of the (μ/μ_w, λ)-CMA-ES.
#[derive(Clone, Debug)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub sigma: f64,
    pub path_sigma: DVector<f64>,
    pub path_c: DVector<f64>,
    pub generation: usize,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
}

impl CmaState {
    fn new(x0: &[f64], sigma: f64) -> Self {
        let n = x0.len();
        CmaState {
            mean: DVector::from_column_slice(x0),
            cov: DMatrix::identity(n, n),
            sigma,
            path_sigma: DVector::zeros(n),
            path_c: DVector::zeros(n),
            generation: 0,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
        }
    }

    /// Refreshes `B` and `D` from the covariance; resets on degeneracy.
    fn decompose(&mut self) -> bool {
        let n = self.mean.len();
        self.cov = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(self.cov.clone());
        let vals = &eig.eigenvalues;
        let max = vals.max();
        let min = vals.min();
        let degenerate = !vals.iter().all(|v| v.is_finite())
            || max <= 0.0
            || min < -EIGEN_FLOOR * max
            || max / min.max(EIGEN_FLOOR * max) > 1e14;
        if degenerate {
            self.cov = DMatrix::identity(n, n);
            self.basis = DMatrix::identity(n, n);
            self.scales = DVector::from_element(n, 1.0);
            self.path_c.fill(0.0);
            return true;
        }
        self.basis = eig.eigenvectors;
        self.scales = vals.map(|v| v.max(EIGEN_FLOOR * max).sqrt());
        false
    }
}

/// Minimizes `f` given as a batch objective: it receives all offspring of a
/// generation and returns their values in order.
///
/// Returns the best point ever evaluated. Deterministic for a fixed seed.
pub fn cmaes_minimize_batch<F>(mut f: F, x0: &[f64], sigma0: f64, opts: &CmaesOptions) -> Result<CmaesResult>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Contract("empty search space".into()));
    }
    if !(sigma0 > 0.0) {
        return Err(Error::Config(format!("initial step size {sigma0} must be positive")));
    }
    let nf = n as f64;
    let lambda = opts.population.unwrap_or(4 + (3.0 * nf.ln()).floor() as usize);
    if lambda < 2 {
        return Err(Error::Config(format!("population {lambda} below 2")));
    }
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu)
        .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cs = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let ds = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let cc = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let cmu = (1.0 - c1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut st = CmaState::new(x0, sigma0);
    let mut best_x = x0.to_vec();
    let mut best_f = f64::INFINITY;
    let mut evals = 0;
    let mut history = Vec::new();
    let mut reset_pending = false;

    while st.generation < opts.max_generations && evals + lambda <= opts.max_evaluations.max(lambda) {
        let z: Vec<DVector<f64>> = (0..lambda)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect();
        let y: Vec<DVector<f64>> = z.iter().map(|zi| &st.basis * zi.component_mul(&st.scales)).collect();
        let xs: Vec<Vec<f64>> = y
            .iter()
            .map(|yi| (&st.mean + yi * st.sigma).as_slice().to_vec())
            .collect();
        let fs = f(&xs)?;
        if fs.len() != lambda {
            return Err(Error::Contract(format!(
                "objective returned {} values for {lambda} points",
                fs.len()
            )));
        }
        evals += lambda;
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        let gen_best = fs[order[0]];
        if gen_best < best_f {
            best_f = gen_best;
            best_x = xs[order[0]].clone();
        }

        let mut y_w = DVector::zeros(n);
        for (w, &i) in weights.iter().zip(&order) {
            y_w += &y[i] * *w;
        }
        st.mean += &y_w * st.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt = &st.basis * (st.basis.transpose() * &y_w).component_div(&st.scales);
        st.path_sigma = &st.path_sigma * (1.0 - cs) + inv_sqrt * (cs * (2.0 - cs) * mu_eff).sqrt();
        let gen = (st.generation + 1) as f64;
        let ps_norm = st.path_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * gen)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hs = if h_sigma { 1.0 } else { 0.0 };
        st.path_c = &st.path_c * (1.0 - cc) + &y_w * (hs * (cc * (2.0 - cc) * mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, &i) in weights.iter().zip(&order) {
            rank_mu += &y[i] * y[i].transpose() * *w;
        }
        let delta_h = (1.0 - hs) * cc * (2.0 - cc);
        st.cov = &st.cov * (1.0 - c1 - cmu + c1 * delta_h) + &st.path_c * st.path_c.transpose() * c1 + rank_mu * cmu;
        st.sigma *= ((cs / ds) * (ps_norm / chi_n - 1.0)).exp();
        if !st.sigma.is_finite() || st.sigma <= 0.0 {
            st.sigma = sigma0;
            reset_pending = true;
        }
        let reset = st.decompose() || std::mem::take(&mut reset_pending);
        st.generation += 1;
        history.push(GenerationLog {
            generation: st.generation,
            evaluations: evals,
            generation_best: gen_best,
            best: best_f,
            sigma: st.sigma,
            covariance_reset: reset,
        });
        if best_f < opts.target {
            break;
        }
    }
    Ok(CmaesResult {
        best_x,
        best_f,
        evaluations: evals,
        history,
    })
}

/// Sequential convenience wrapper around [`cmaes_minimize_batch`].
pub fn cmaes_minimize<F>(mut f: F, x0: &[f64], sigma0: f64, opts: &CmaesOptions) -> Result<CmaesResult>
where
    F: FnMut(&[f64]) -> f64,
{
    cmaes_minimize_batch(|xs| Ok(xs.iter().map(|x| f(x)).collect()), x0, sigma0, opts)
}
