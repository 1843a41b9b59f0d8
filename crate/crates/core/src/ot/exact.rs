use super::cloud::{sq_dist, PointCloud};
use crate::error::{Error, Result};

/// Largest cloud accepted by the assignment solver.
pub const EXACT_MAX_POINTS: usize = 512;

/// Minimum-cost perfect matching of a square cost matrix (row-major).
/// Returns `assignment[row] = column`.
pub fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // shortest augmenting path with row/column potentials, 1-based sentinel
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if matched[j] > 0 {
            assignment[matched[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Optimal pairing of `a` onto `b` under squared distance.
pub fn optimal_pairing(a: &PointCloud, b: &PointCloud) -> Result<Vec<usize>> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("clouds of dimension {} and {}", a.dim(), b.dim())));
    }
    if a.len() > EXACT_MAX_POINTS {
        return Err(Error::Contract(format!(
            "exact transport limited to {EXACT_MAX_POINTS} points, got {}",
            a.len()
        )));
    }
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = sq_dist(a.point(i), b.point(j));
        }
    }
    Ok(solve_assignment(&cost, n))
}

/// Quadratic Wasserstein distance between equal-size clouds:
/// `sqrt(min_π (1/N) Σ ‖a_i − b_π(i)‖²)`.
pub fn exact_w2(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let perm = optimal_pairing(a, b)?;
    let total: f64 = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| sq_dist(a.point(i), b.point(j)))
        .sum();
    Ok((total / a.len() as f64).sqrt())
}
