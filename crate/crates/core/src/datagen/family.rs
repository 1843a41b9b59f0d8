use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{ActionBounds, Pose};

/// Shape of a scripted cup trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Cosine ramp to a maximum tilt, hold, cosine return; random-walk translation.
    CosineHold,
    /// Independent sinusoids in tilt and translation.
    Sinusoid,
    /// Constant-velocity tilt to one side and back, then to the other side.
    LinearTilt,
    /// Translate, rotate, return, each a third of the horizon, with noise.
    NoisyLinear,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [
        FamilyKind::CosineHold,
        FamilyKind::Sinusoid,
        FamilyKind::LinearTilt,
        FamilyKind::NoisyLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::CosineHold => "cosine-hold",
            FamilyKind::Sinusoid => "sinusoid",
            FamilyKind::LinearTilt => "linear-tilt",
            FamilyKind::NoisyLinear => "noisy-linear",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown trajectory family '{s}'")))
    }
}

/// Sampling ranges for [`TrajectoryFamily::sample`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyRanges {
    pub theta_max: (f64, f64),
    pub frequency: (f64, f64),
    pub tilt_velocity: (f64, f64),
    pub y_amplitude: (f64, f64),
    pub theta_noise: (f64, f64),
    pub y_noise: f64,
    pub plateau: usize,
}

impl Default for FamilyRanges {
    fn default() -> Self {
        FamilyRanges {
            theta_max: (0.6, 2.8),
            frequency: (0.2, 1.0),
            tilt_velocity: (0.5, 2.0),
            y_amplitude: (0.0, 0.08),
            theta_noise: (0.0, 0.01),
            y_noise: 1e-3,
            plateau: 30,
        }
    }
}

/// Fully specified member of a trajectory family.
///
/// Together with a horizon and frame duration it determines the action
/// sequence exactly; `seed` drives the noise terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFamily {
    pub kind: FamilyKind,
    /// +1 or -1: which way the cup tilts first.
    pub direction: f64,
    /// Peak tilt (cosine-hold, linear-tilt, noisy-linear) or tilt amplitude (sinusoid), radians.
    pub theta_max: f64,
    /// Translation amplitude or target, meters, signed.
    pub y_amplitude: f64,
    /// Tilt frequency for the sinusoid family, Hz.
    pub frequency_theta: f64,
    /// Translation frequency for the sinusoid family, Hz.
    pub frequency_y: f64,
    /// Tilt speed for the linear-tilt family, rad/s.
    pub tilt_velocity: f64,
    /// Per-step tilt noise standard deviation, radians.
    pub theta_noise: f64,
    /// Per-step translation noise standard deviation, meters.
    pub y_noise: f64,
    /// Frames held at peak tilt for the cosine-hold family.
    pub plateau: usize,
    pub seed: u64,
}

impl TrajectoryFamily {
    /// A noise-free member with everything but `kind` zeroed.
    pub fn quiet(kind: FamilyKind) -> Self {
        TrajectoryFamily {
            kind,
            direction: 1.0,
            theta_max: 0.0,
            y_amplitude: 0.0,
            frequency_theta: 0.0,
            frequency_y: 0.0,
            tilt_velocity: 0.0,
            theta_noise: 0.0,
            y_noise: 0.0,
            plateau: 30,
            seed: 0,
        }
    }

    /// Draws a member of `kind` with parameters from `ranges`.
    pub fn sample<R: Rng + ?Sized>(kind: FamilyKind, ranges: &FamilyRanges, rng: &mut R) -> Self {
        let mut u = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let theta_max = u(ranges.theta_max);
        let y_amplitude = u(ranges.y_amplitude);
        let frequency_theta = u(ranges.frequency);
        let frequency_y = u(ranges.frequency);
        let tilt_velocity = u(ranges.tilt_velocity);
        let theta_noise = u(ranges.theta_noise);
        let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let y_sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        TrajectoryFamily {
            kind,
            direction,
            theta_max,
            y_amplitude: y_sign * y_amplitude,
            frequency_theta,
            frequency_y,
            tilt_velocity,
            theta_noise,
            y_noise: ranges.y_noise,
            plateau: ranges.plateau,
            seed: rng.random(),
        }
    }

    /// Like [`TrajectoryFamily::sample`], then halves the tilt and translation
    /// amplitudes until the noise-free profile fits `bounds` over `horizon`.
    pub fn sample_feasible<R: Rng + ?Sized>(
        kind: FamilyKind,
        ranges: &FamilyRanges,
        horizon: usize,
        frame_dt: f64,
        bounds: &ActionBounds,
        rng: &mut R,
    ) -> Result<Self> {
        let mut f = Self::sample(kind, ranges, rng);
        for _ in 0..64 {
            match make_trajectory(&f, horizon, frame_dt, Pose::default(), bounds) {
                Ok(_) => return Ok(f),
                Err(Error::Parameter(_)) => {
                    f.theta_max *= 0.5;
                    f.y_amplitude *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
        make_trajectory(&f, horizon, frame_dt, Pose::default(), bounds).map(|_| f)
    }

    fn validate(&self, bounds: &ActionBounds) -> Result<()> {
        let finite = [
            self.theta_max,
            self.y_amplitude,
            self.frequency_theta,
            self.frequency_y,
            self.tilt_velocity,
            self.theta_noise,
            self.y_noise,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite family parameter".into()));
        }
        if self.direction.abs() != 1.0 {
            return Err(Error::Parameter(format!(
                "direction must be ±1, got {}",
                self.direction
            )));
        }
        if self.theta_max < 0.0 || self.theta_max > bounds.theta {
            return Err(Error::Parameter(format!(
                "peak tilt {} outside [0, {}]",
                self.theta_max, bounds.theta
            )));
        }
        if self.y_amplitude.abs() > bounds.y {
            return Err(Error::Parameter(format!(
                "translation amplitude {} exceeds {}",
                self.y_amplitude, bounds.y
            )));
        }
        if self.frequency_theta < 0.0 || self.frequency_y < 0.0 || self.tilt_velocity < 0.0 {
            return Err(Error::Parameter(
                "frequencies and velocities must be non-negative".into(),
            ));
        }
        if self.theta_noise < 0.0 || self.y_noise < 0.0 {
            return Err(Error::Parameter("noise scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// Builds the `horizon` absolute poses of frames `1..=horizon`, starting from
/// `start` at frame 0, with frames `frame_dt` seconds apart.
///
/// The noise-free profile must satisfy `bounds`; noise is added afterwards
/// and the result clipped back into them.
pub fn make_trajectory(
    family: &TrajectoryFamily,
    horizon: usize,
    frame_dt: f64,
    start: Pose,
    bounds: &ActionBounds,
) -> Result<Vec<Pose>> {
    if horizon < 2 {
        return Err(Error::Parameter(format!("horizon {horizon} is below 2")));
    }
    if !(frame_dt > 0.0) {
        return Err(Error::Parameter("frame duration must be positive".into()));
    }
    family.validate(bounds)?;
    let h = horizon;
    let s = family.direction;
    let th = family.theta_max;
    let profile: Vec<(f64, f64)> = match family.kind {
        FamilyKind::CosineHold => {
            let plateau = family.plateau.min(h - 2);
            let up = (h - plateau) / 2;
            let down = h - plateau - up;
            (1..=h)
                .map(|f| {
                    let theta = if f <= up {
                        0.5 * (1.0 - (PI * f as f64 / up as f64).cos())
                    } else if f <= up + plateau {
                        1.0
                    } else {
                        let j = (f - up - plateau) as f64;
                        0.5 * (1.0 + (PI * j / down as f64).cos())
                    };
                    (s * th * theta, 0.0)
                })
                .collect()
        }
        FamilyKind::Sinusoid => (1..=h)
            .map(|f| {
                let t = f as f64 * frame_dt;
                (
                    s * th * (2.0 * PI * family.frequency_theta * t).sin(),
                    family.y_amplitude * (2.0 * PI * family.frequency_y * t).sin(),
                )
            })
            .collect(),
        FamilyKind::LinearTilt => {
            let quarter = h as f64 / 4.0;
            let w = family.tilt_velocity * frame_dt;
            (1..=h)
                .map(|f| {
                    let u = f as f64;
                    let theta = if u <= 2.0 * quarter {
                        s * (w * (quarter - (u - quarter).abs())).min(th)
                    } else {
                        -s * (w * (quarter - (u - 3.0 * quarter).abs())).max(0.0).min(th)
                    };
                    (theta, 0.0)
                })
                .collect()
        }
        FamilyKind::NoisyLinear => {
            let a = h / 3;
            let b = (2 * h) / 3;
            let (y_t, th_t) = (family.y_amplitude, s * th);
            (1..=h)
                .map(|f| {
                    if f <= a {
                        (0.0, y_t * f as f64 / a as f64)
                    } else if f <= b {
                        (th_t * (f - a) as f64 / (b - a) as f64, y_t)
                    } else {
                        let r = 1.0 - (f - b) as f64 / (h - b) as f64;
                        (th_t * r, y_t * r)
                    }
                })
                .collect()
        }
    };
    let mut poses: Vec<Pose> = profile
        .into_iter()
        .map(|(theta, y)| Pose::new(start.theta + theta, start.y + y))
        .collect();
    bounds.check(start, &poses)?;

    let mut rng = ChaCha8Rng::seed_from_u64(family.seed);
    let theta_noise = Normal::new(0.0, family.theta_noise).map_err(|e| Error::Parameter(e.to_string()))?;
    let y_noise = Normal::new(0.0, family.y_noise).map_err(|e| Error::Parameter(e.to_string()))?;
    match family.kind {
        FamilyKind::CosineHold => {
            let mut walk = 0.0;
            for p in poses.iter_mut() {
                walk += y_noise.sample(&mut rng);
                p.theta += theta_noise.sample(&mut rng);
                p.y += walk;
            }
        }
        FamilyKind::NoisyLinear => {
            for p in poses.iter_mut() {
                p.y += y_noise.sample(&mut rng);
                p.theta += theta_noise.sample(&mut rng);
            }
        }
        FamilyKind::Sinusoid | FamilyKind::LinearTilt => {}
    }
    bounds.clip(start, &mut poses);
    Ok(poses)
}

/// Small independent jitter around `start`, used for the noise-only record.
pub fn noise_trajectory(
    horizon: usize,
    theta_std: f64,
    y_std: f64,
    start: Pose,
    bounds: &ActionBounds,
    seed: u64,
) -> Result<Vec<Pose>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = Normal::new(0.0, theta_std).map_err(|e| Error::Parameter(e.to_string()))?;
    let ny = Normal::new(0.0, y_std).map_err(|e| Error::Parameter(e.to_string()))?;
    let mut poses: Vec<Pose> = (0..horizon)
        .map(|_| Pose::new(start.theta + nt.sample(&mut rng), start.y + ny.sample(&mut rng)))
        .collect();
    bounds.clip(start, &mut poses);
    Ok(poses)
}
