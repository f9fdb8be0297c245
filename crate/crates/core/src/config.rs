use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::MAX_ITERATION;

/// Momentum damping for ARWP and friction for KLMC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DampingSchedule {
    /// Heavy-ball damping: momentum factor `1 - a*eta`.
    Constant(f64),
    /// Momentum factor `(k-1)/(k+2)` at step `k = 1, 2, ...`, clamped at 0.
    Nesterov,
}

impl DampingSchedule {
    /// Momentum retention factor applied at zero-based iteration `iteration`.
    pub fn momentum_factor(&self, eta: f64, iteration: usize) -> f64 {
        match *self {
            DampingSchedule::Constant(a) => 1.0 - a * eta,
            DampingSchedule::Nesterov => {
                let k = (iteration + 1) as f64;
                ((k - 1.0) / (k + 2.0)).max(0.0)
            }
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match *self {
            DampingSchedule::Constant(a) => Some(a),
            DampingSchedule::Nesterov => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalizer {
    #[default]
    MonteCarlo,
    Laplace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub eta: f64,
    /// Regularization (kernel temperature) `T`.
    pub t: f64,
    /// Inverse temperature of the target `exp(-beta V)`.
    pub beta: f64,
    pub damping: DampingSchedule,
    pub mc_samples: usize,
    pub normalizer: Normalizer,
    pub seed: u64,
    pub max_iter: usize,
    /// ILA Lipschitz parameter `L`.
    pub lipschitz: f64,
    /// ILA friction `epsilon`.
    pub friction: f64,
}

pub const DEFAULT_MC_SAMPLES: usize = 100;
pub const DEFAULT_ILA_FRICTION: f64 = 1.5;

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            t: 0.1,
            beta: 1.0,
            damping: DampingSchedule::Constant(1.0),
            mc_samples: DEFAULT_MC_SAMPLES,
            normalizer: Normalizer::MonteCarlo,
            seed: 0,
            max_iter: 100,
            lipschitz: 1.0,
            friction: DEFAULT_ILA_FRICTION,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!(
                "eta must be positive and finite, got {}",
                self.eta
            )));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::config(format!(
                "T must be nonnegative and finite, got {}",
                self.t
            )));
        }
        // beta = +inf is accepted: it switches the Langevin noise off.
        if !(self.beta > 0.0) {
            return Err(Error::config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.mc_samples == 0 {
            return Err(Error::config("mc_samples must be at least 1"));
        }
        if let DampingSchedule::Constant(a) = self.damping {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(format!("constant damping must be positive, got {a}")));
            }
        }
        if self.max_iter == 0 || self.max_iter as u64 > MAX_ITERATION {
            return Err(Error::config(format!(
                "max_iter must be in 1..={MAX_ITERATION}, got {}",
                self.max_iter
            )));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::config(format!(
                "lipschitz must be positive, got {}",
                self.lipschitz
            )));
        }
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return Err(Error::config(format!(
                "friction must be positive, got {}",
                self.friction
            )));
        }
        Ok(())
    }
}
