use crate::error::{Error, Result};
use crate::scene::Pose;

/// Monotone piecewise cubic Hermite interpolant with Fritsch–Carlson slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    /// `xs` must be strictly increasing with at least two knots.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::Contract(format!(
                "need at least two knots, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract("knots must be strictly increasing".into()));
        }
        let n = xs.len();
        let secant: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])).collect();
        let mut m = vec![0.0; n];
        m[0] = secant[0];
        m[n - 1] = secant[n - 2];
        for k in 1..n - 1 {
            m[k] = if secant[k - 1] * secant[k] > 0.0 {
                0.5 * (secant[k - 1] + secant[k])
            } else {
                0.0
            };
        }
        for k in 0..n - 1 {
            if secant[k] == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let a = m[k] / secant[k];
            let b = m[k + 1] / secant[k];
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                m[k] = tau * a * secant[k];
                m[k + 1] = tau * b * secant[k];
            }
        }
        Ok(Pchip {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes: m,
        })
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Evaluates the interpolant; outside the knot range the end value is held.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = self.xs.partition_point(|&v| v <= x) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        if t == 0.0 {
            return self.ys[k];
        }
        let t2 = t * t;
        let t3 = t2 * t;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        // difference form keeps constant data exact
        self.ys[k] + h01 * (self.ys[k + 1] - self.ys[k]) + h * (h10 * self.slopes[k] + h11 * self.slopes[k + 1])
    }
}

/// Poses at frames `1..=horizon` from via-points on uniformly spaced knots:
/// `via[k]` sits at frame `k·horizon/Q`, so `via[0]` is the pose at frame 0
/// and `via[Q]` the pose at the last frame.
pub fn pchip_interpolate(via: &[Pose], horizon: usize) -> Result<Vec<Pose>> {
    if via.len() < 2 {
        return Err(Error::Contract("need at least two via-points".into()));
    }
    if horizon + 1 < via.len() {
        return Err(Error::Contract(format!(
            "horizon {horizon} shorter than {} via-points",
            via.len()
        )));
    }
    let q = (via.len() - 1) as f64;
    let xs: Vec<f64> = (0..via.len()).map(|k| k as f64 * horizon as f64 / q).collect();
    let th: Vec<f64> = via.iter().map(|p| p.theta).collect();
    let ys: Vec<f64> = via.iter().map(|p| p.y).collect();
    let pt = Pchip::new(&xs, &th)?;
    let py = Pchip::new(&xs, &ys)?;
    Ok((1..=horizon)
        .map(|t| Pose::new(pt.eval(t as f64), py.eval(t as f64)))
        .collect())
}
