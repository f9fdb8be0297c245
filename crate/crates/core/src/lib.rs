//! Accelerated regularized Wasserstein proximal (ARWP) particle sampling.
//!
//! The crate is organised bottom-up:
//!
//! * [`ensemble`], [`config`] and [`rng`] hold the shared particle state, sampler
//!   settings and counter-keyed random streams.
//! * [`potentials`] provides the target potentials `V` with gradients.
//! * [`rwpo`] estimates the score of the regularized Wasserstein proximal of an
//!   empirical measure through a row-softmax interaction matrix.
//! * [`samplers`] contains one-step updates for ARWP, BRWP and the Langevin
//!   baselines (ULA, MALA, ILA, KLMC).
//! * [`theory`] is the closed-form Gaussian engine: covariance maps, flows,
//!   linearized rates and Lyapunov functionals.
//! * [`metrics`] evaluates kernel density estimates and grid KL divergences.
//!
//! With the default `parallel` feature, per-particle and per-grid-node work is
//! spread over a rayon pool. Results do not depend on the number of threads.

pub mod config;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod potentials;
pub mod rng;
pub mod rwpo;
pub mod samplers;
pub mod theory;

pub use config::{DampingSchedule, Normalizer, SamplerConfig};
pub use ensemble::{ensemble_covariance, ensemble_mean, init_gaussian_ensemble, ParticleEnsemble};
pub use error::{Error, Result};
pub use potentials::{GaussianMixturePotential, Potential, PotentialModel, QuadraticPotential, RosenbrockPotential};
pub use rng::{RngStream, StreamPurpose};
pub use samplers::SamplerKind;
