use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Forced, damped Duffing oscillator
/// `x1' = x2`, `x2' = -alpha x2 + x1 (1 - x1^2) + gamma cos(omega t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DuffingConfig {
    pub alpha_damping: f64,
    pub gamma_forcing: f64,
    pub omega: f64,
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub init_distribution: InitDistribution,
}

impl Default for DuffingConfig {
    fn default() -> Self {
        Self {
            alpha_damping: 0.05,
            gamma_forcing: 0.4,
            omega: 1.3,
            t0: 0.0,
            t1: 100.0,
            dt: 0.01,
            init_distribution: InitDistribution::default(),
        }
    }
}

impl DuffingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t1 > self.t0) {
            return Err(domain(format!("need t1 > t0, got [{}, {}]", self.t0, self.t1)));
        }
        self.init_distribution.validate()
    }

    pub fn rhs(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        [
            x[1],
            -self.alpha_damping * x[1] + x[0] * (1.0 - x[0] * x[0])
                + self.gamma_forcing * (self.omega * t).cos(),
        ]
    }

    /// Number of RK4 steps: `round((t1 - t0) / dt)`, at least one.
    pub fn n_steps(&self) -> usize {
        (((self.t1 - self.t0) / self.dt).round() as usize).max(1)
    }
}

/// Sampler for the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitDistribution {
    /// Independent uniforms on `[low_i, high_i]`.
    Uniform { low: [f64; 2], high: [f64; 2] },
    /// Independent normals.
    Gaussian { mean: [f64; 2], std: [f64; 2] },
}

impl Default for InitDistribution {
    fn default() -> Self {
        InitDistribution::Uniform {
            low: [0.95, -0.05],
            high: [1.05, 0.05],
        }
    }
}

impl InitDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitDistribution::Uniform { low, high } => {
                if low.iter().zip(high).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
                    return Err(domain("uniform initial box needs finite low <= high"));
                }
            }
            InitDistribution::Gaussian { mean, std } => {
                if mean.iter().chain(std).any(|v| !v.is_finite()) || std.iter().any(|&s| s < 0.0) {
                    return Err(domain("gaussian initial state needs finite mean and std >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match self {
            InitDistribution::Uniform { low, high } => {
                std::array::from_fn(|i| low[i] + (high[i] - low[i]) * rng.random::<f64>())
            }
            InitDistribution::Gaussian { mean, std } => std::array::from_fn(|i| {
                Normal::new(mean[i], std[i])
                    .expect("validated std")
                    .sample(rng)
            }),
        }
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<const N: usize>(
    f: impl Fn(f64, [f64; N]) -> [f64; N],
    t: f64,
    x: [f64; N],
    h: f64,
) -> [f64; N] {
    let axpy = |a: f64, k: &[f64; N]| -> [f64; N] { std::array::from_fn(|i| x[i] + a * k[i]) };
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, axpy(0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, axpy(0.5 * h, &k2));
    let k4 = f(t + h, axpy(h, &k3));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// State at `t1` starting from `x0` at `t0`, integrated with fixed-step RK4.
/// The step is adjusted to `(t1 - t0) / n_steps()` so the final time is hit
/// exactly.
pub fn duffing_terminal(x0: [f64; 2], cfg: &DuffingConfig) -> Result<[f64; 2]> {
    cfg.validate()?;
    let n = cfg.n_steps();
    let h = (cfg.t1 - cfg.t0) / n as f64;
    let mut x = x0;
    for i in 0..n {
        let t = cfg.t0 + i as f64 * h;
        x = rk4_step(|t, x| cfg.rhs(t, x), t, x, h);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: t + h,
                state: x.to_vec(),
            });
        }
    }
    Ok(x)
}
