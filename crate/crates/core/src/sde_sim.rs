//! Euler–Maruyama paths of dS = σ₀·S^θ dW (+ b(S) dt) with known tail power,
//! used as ground truth for the estimation pipeline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::PriceSeries;

/// Name of the generator recorded alongside simulated output.
pub const GENERATOR: &str = "ChaCha8Rng::seed_from_u64 + rand_distr::StandardNormal";

/// Paths are absorbed once they reach this level.
pub const ABSORPTION_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub sigma0: f64,
    pub theta: f64,
    pub s0: f64,
    /// Number of observations, including the initial price.
    pub steps: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::invalid(format!("sigma0 must be non-negative, got {}", self.sigma0)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid(format!("theta must be non-negative, got {}", self.theta)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::invalid(format!("initial price must be positive, got {}", self.s0)));
        }
        if self.steps < 2 {
            return Err(Error::invalid(format!("need at least 2 steps, got {}", self.steps)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }

    /// Model-time step between observations.
    pub fn dt(&self) -> f64 {
        self.horizon / (self.steps - 1) as f64
    }

    pub fn sigma(&self, x: f64) -> f64 {
        self.sigma0 * x.powf(self.theta)
    }
}

/// Standard normal draws for `count` increments from `seed`.
pub fn normal_draws(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Euler path driven by the given Brownian increments `dw` (each with
/// variance `dt`). Returns `dw.len() + 1` prices.
pub fn euler_path<B: Fn(f64) -> f64>(spec: &SimSpec, dt: f64, dw: &[f64], drift: B) -> Vec<f64> {
    let mut path = Vec::with_capacity(dw.len() + 1);
    let mut s = spec.s0;
    path.push(s);
    for &w in dw {
        if s > ABSORPTION_FLOOR {
            s += spec.sigma(s) * w + drift(s) * dt;
            if s <= ABSORPTION_FLOOR || !s.is_finite() {
                s = ABSORPTION_FLOOR;
            }
        }
        path.push(s);
    }
    path
}

/// Driftless path.
pub fn simulate(spec: &SimSpec) -> Result<PriceSeries> {
    simulate_with_drift(spec, |_| 0.0)
}

/// Path with a deterministic drift `b(S)`.
pub fn simulate_with_drift<B: Fn(f64) -> f64>(spec: &SimSpec, drift: B) -> Result<PriceSeries> {
    spec.validate()?;
    let dt = spec.dt();
    let sd = dt.sqrt();
    let dw: Vec<f64> = normal_draws(spec.seed, spec.steps - 1).into_iter().map(|z| z * sd).collect();
    PriceSeries::from_prices(euler_path(spec, dt, &dw, drift), spec.horizon)
}

/// Tail power of σ(x) = σ₀·x^θ, and whether ∫ x/σ²(x) dx converges at infinity.
pub fn ground_truth_alpha(spec: &SimSpec) -> (f64, bool) {
    (spec.theta, spec.theta > 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(theta: f64, steps: usize, seed: u64) -> SimSpec {
        SimSpec { sigma0: 0.2, theta, s0: 1.0, steps, horizon: 1.0, seed }
    }

    #[test]
    fn zero_diffusion_is_constant() {
        let s = simulate(&SimSpec { sigma0: 0.0, ..spec(1.0, 50, 3) }).unwrap();
        assert!(s.prices().iter().all(|&p| p == 1.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate(&spec(1.0, 1000, 42)).unwrap();
        let b = simulate(&spec(1.0, 1000, 42)).unwrap();
        let c = simulate(&spec(1.0, 1000, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn observation_count_and_span() {
        let s = simulate(&spec(1.0, 10, 1)).unwrap();
        assert_eq!(s.len(), 10);
        assert!((s.time_span() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn drift_hook() {
        let s = simulate_with_drift(&SimSpec { sigma0: 0.0, ..spec(1.0, 11, 0) }, |_| 1.0).unwrap();
        assert!((s.prices()[10] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn absorbed_paths_stay_put() {
        let sp = SimSpec { sigma0: 5.0, theta: 0.5, s0: 0.01, steps: 5000, horizon: 1.0, seed: 9 };
        let s = simulate(&sp).unwrap();
        let p = s.prices();
        if let Some(hit) = p.iter().position(|&x| x <= ABSORPTION_FLOOR) {
            assert!(p[hit..].iter().all(|&x| x == ABSORPTION_FLOOR));
        }
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn invalid_specs() {
        assert!(simulate(&spec(1.0, 1, 0)).is_err());
        assert!(simulate(&SimSpec { horizon: 0.0, ..spec(1.0, 10, 0) }).is_err());
        assert!(simulate(&SimSpec { s0: -1.0, ..spec(1.0, 10, 0) }).is_err());
        assert!(simulate(&spec(-0.5, 10, 0)).is_err());
    }

    #[test]
    fn ground_truth() {
        assert_eq!(ground_truth_alpha(&spec(1.5, 10, 0)), (1.5, true));
        assert_eq!(ground_truth_alpha(&spec(1.0, 10, 0)), (1.0, false));
        assert_eq!(ground_truth_alpha(&spec(0.5, 10, 0)), (0.5, false));
    }
}
