use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};

/// Entropic transport settings. Costs are `½‖x − y‖²`, so `epsilon` is in m².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the L¹ marginal error falls below this.
    pub tolerance: f64,
    /// Geometric factor between annealing stages, in `(0, 1)`.
    pub anneal: f64,
    /// Iteration cap for each intermediate annealing stage.
    pub stage_iters: usize,
}

impl SinkhornConfig {
    pub fn new(epsilon: f64) -> Self {
        SinkhornConfig {
            epsilon,
            max_iters: 2000,
            tolerance: 1e-6,
            anneal: 0.5,
            stage_iters: 10,
        }
    }

    /// Blur of 5% of the scene diagonal: `ε = (0.05·d)²`.
    pub fn for_diagonal(diagonal: f64) -> Self {
        Self::new((0.05 * diagonal).powi(2))
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.tolerance > 0.0 && self.anneal > 0.0 && self.anneal < 1.0) {
            return Err(Error::Config(format!("invalid Sinkhorn settings {self:?}")));
        }
        Ok(())
    }
}

/// Value of an entropic transport quantity with its convergence report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornResult {
    pub value: f64,
    /// Achieved L¹ marginal error (largest over the sub-problems).
    pub marginal_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Cost {
    xy: Vec<f64>,
    yx: Vec<f64>,
    n: usize,
    m: usize,
}

impl Cost {
    fn new(a: &PointCloud, b: &PointCloud) -> Cost {
        let (n, m) = (a.len(), b.len());
        let xy: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..m).map(move |j| 0.5 * sq_dist(a.point(i), b.point(j))))
            .collect();
        let mut yx = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                yx[j * n + i] = xy[i * m + j];
            }
        }
        Cost { xy, yx, n, m }
    }
}

/// `out_i = −ε log Σ_j w_j exp((h_j − C_ij)/ε)` for uniform weights `w = 1/cols`.
fn softmin(eps: f64, cost: &[f64], cols: usize, h: &[f64], out: &mut [f64], buf: &mut Vec<f64>) {
    let log_w = -(cols as f64).ln();
    buf.resize(cols, 0.0);
    for (i, o) in out.iter_mut().enumerate() {
        let row = &cost[i * cols..(i + 1) * cols];
        let mut mx = f64::NEG_INFINITY;
        for ((b, &c), &hj) in buf.iter_mut().zip(row).zip(h) {
            *b = (hj - c) / eps;
            mx = mx.max(*b);
        }
        let s: f64 = buf.iter().map(|&v| (v - mx).exp()).sum();
        *o = -eps * (mx + s.ln() + log_w);
    }
}

fn marginal_error(eps: f64, old: &[f64], new: &[f64]) -> f64 {
    let w = 1.0 / old.len() as f64;
    old.iter()
        .zip(new)
        .map(|(o, n)| w * (((o - n) / eps).exp() - 1.0).abs())
        .sum()
}

fn schedule(cfg: &SinkhornConfig, max_cost: f64) -> Vec<f64> {
    let mut eps = Vec::new();
    let mut e = max_cost;
    while e > cfg.epsilon {
        eps.push(e);
        e *= cfg.anneal;
    }
    eps.push(cfg.epsilon);
    eps
}

struct Solve {
    f: Vec<f64>,
    g: Vec<f64>,
    err: f64,
    iters: usize,
    converged: bool,
}

fn solve_pair(cost: &Cost, cfg: &SinkhornConfig, max_cost: f64, trace: Option<&mut Vec<f64>>) -> Solve {
    let (n, m) = (cost.n, cost.m);
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut g_new = vec![0.0; m];
    let mut buf = Vec::new();
    let mut iters = 0;
    let mut err = f64::INFINITY;
    let stages = match trace {
        Some(_) => vec![cfg.epsilon],
        None => schedule(cfg, max_cost),
    };
    let mut trace = trace;
    let last = stages.len() - 1;
    for (s, &eps) in stages.iter().enumerate() {
        let cap = if s == last { cfg.max_iters } else { cfg.stage_iters };
        softmin(eps, &cost.yx, n, &f, &mut g, &mut buf);
        softmin(eps, &cost.xy, m, &g, &mut f, &mut buf);
        iters += 1;
        for _ in 0..cap {
            softmin(eps, &cost.yx, n, &f, &mut g_new, &mut buf);
            err = marginal_error(eps, &g, &g_new);
            if let Some(t) = trace.as_deref_mut() {
                t.push(err);
            }
            if err < cfg.tolerance {
                break;
            }
            std::mem::swap(&mut g, &mut g_new);
            softmin(eps, &cost.xy, m, &g, &mut f, &mut buf);
            iters += 1;
        }
    }
    Solve {
        f,
        g,
        converged: err < cfg.tolerance,
        err,
        iters,
    }
}

/// Symmetric problem `OT_ε(a, a)`: returns the potential and its report.
fn solve_self(a: &PointCloud, cfg: &SinkhornConfig) -> Solve {
    let cost = Cost::new(a, a);
    let n = cost.n;
    let mut f = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut buf = Vec::new();
    let mut iters = 0;
    let mut err = f64::INFINITY;
    let stages = schedule(cfg, 0.5 * a.max_sq_distance(a));
    let last = stages.len() - 1;
    for (s, &eps) in stages.iter().enumerate() {
        let cap = if s == last { cfg.max_iters } else { cfg.stage_iters };
        for _ in 0..cap {
            softmin(eps, &cost.xy, n, &f, &mut t, &mut buf);
            err = marginal_error(eps, &f, &t);
            iters += 1;
            if err < cfg.tolerance {
                break;
            }
            for (fi, ti) in f.iter_mut().zip(&t) {
                *fi = 0.5 * (*fi + ti);
            }
        }
    }
    Solve {
        g: f.clone(),
        f,
        converged: err < cfg.tolerance,
        err,
        iters,
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_pair(a: &PointCloud, b: &PointCloud, cfg: &SinkhornConfig) -> Result<()> {
    cfg.validate()?;
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("clouds of dimension {} and {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Entropic transport cost `OT_ε(a, b) = ⟨a, f⟩ + ⟨b, g⟩` at the dual optimum.
pub fn entropic_ot(a: &PointCloud, b: &PointCloud, cfg: &SinkhornConfig) -> Result<SinkhornResult> {
    check_pair(a, b, cfg)?;
    let s = solve_pair(&Cost::new(a, b), cfg, 0.5 * a.max_sq_distance(b), None);
    Ok(SinkhornResult {
        value: mean(&s.f) + mean(&s.g),
        marginal_error: s.err,
        iterations: s.iters,
        converged: s.converged,
    })
}

/// Marginal error after every iteration at fixed `cfg.epsilon`, without annealing.
pub fn sinkhorn_error_trace(a: &PointCloud, b: &PointCloud, cfg: &SinkhornConfig) -> Result<Vec<f64>> {
    check_pair(a, b, cfg)?;
    let mut trace = Vec::new();
    solve_pair(&Cost::new(a, b), cfg, 0.0, Some(&mut trace));
    Ok(trace)
}

fn divergence_from(ab: Solve, aa: &Solve, bb_term: f64, bb_err: f64, bb_ok: bool) -> SinkhornResult {
    SinkhornResult {
        value: mean(&ab.f) - mean(&aa.f) + mean(&ab.g) - bb_term,
        marginal_error: ab.err.max(aa.err).max(bb_err),
        iterations: ab.iters + aa.iters,
        converged: ab.converged && aa.converged && bb_ok,
    }
}

/// Debiased divergence `S_ε(a, b) = OT_ε(a,b) − ½OT_ε(a,a) − ½OT_ε(b,b)`, m².
pub fn sinkhorn_divergence(a: &PointCloud, b: &PointCloud, cfg: &SinkhornConfig) -> Result<SinkhornResult> {
    let mut ev = SinkhornEvaluator::new(b.clone(), *cfg)?;
    ev.eval(a)
}

/// Divergence against a fixed target with the target's self-term cached.
#[derive(Clone, Debug)]
pub struct SinkhornEvaluator {
    cfg: SinkhornConfig,
    target: PointCloud,
    self_term: Option<(f64, f64, bool)>,
    self_evaluations: usize,
}

impl SinkhornEvaluator {
    pub fn new(target: PointCloud, cfg: SinkhornConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SinkhornEvaluator {
            cfg,
            target,
            self_term: None,
            self_evaluations: 0,
        })
    }

    pub fn config(&self) -> &SinkhornConfig {
        &self.cfg
    }

    pub fn target(&self) -> &PointCloud {
        &self.target
    }

    /// Replaces the target and drops the cached self-term.
    pub fn set_target(&mut self, target: PointCloud) {
        self.target = target;
        self.self_term = None;
    }

    /// Times the target self-term has been solved.
    pub fn self_term_evaluations(&self) -> usize {
        self.self_evaluations
    }

    fn target_term(&mut self) -> (f64, f64, bool) {
        if self.self_term.is_none() {
            let s = solve_self(&self.target, &self.cfg);
            self.self_evaluations += 1;
            self.self_term = Some((mean(&s.f), s.err, s.converged));
        }
        self.self_term.expect("self-term cached")
    }

    fn eval_cached(&self, a: &PointCloud, bb: (f64, f64, bool)) -> Result<SinkhornResult> {
        check_pair(a, &self.target, &self.cfg)?;
        let max_cost = 0.5 * a.max_sq_distance(&self.target);
        let ab = solve_pair(&Cost::new(a, &self.target), &self.cfg, max_cost, None);
        let aa = solve_self(a, &self.cfg);
        Ok(divergence_from(ab, &aa, bb.0, bb.1, bb.2))
    }

    pub fn eval(&mut self, a: &PointCloud) -> Result<SinkhornResult> {
        let bb = self.target_term();
        self.eval_cached(a, bb)
    }

    /// Evaluates many candidates against the target; results keep input order.
    pub fn eval_batch(&mut self, clouds: &[PointCloud]) -> Vec<Result<SinkhornResult>> {
        let bb = self.target_term();
        let this = &*self;
        clouds.par_iter().map(|a| this.eval_cached(a, bb)).collect()
    }
}
