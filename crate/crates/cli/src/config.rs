//! Experiment, sweep and theory configuration files (TOML).

use std::path::{Path, PathBuf};

use arwp_core::config::{DampingSchedule, Normalizer, SamplerConfig, DEFAULT_ILA_FRICTION, DEFAULT_MC_SAMPLES};
use arwp_core::potentials::{
    GaussianMixturePotential, Potential, PotentialModel, QuadraticPotential, RosenbrockPotential,
};
use arwp_core::theory::OptimalMode;
use arwp_core::SamplerKind;
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Iterations at which particle snapshots are written unless configured otherwise.
pub const DEFAULT_SNAPSHOTS: [usize; 4] = [10, 50, 200, 500];

fn one() -> f64 {
    1.0
}

fn default_friction() -> f64 {
    DEFAULT_ILA_FRICTION
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

fn default_true() -> bool {
    true
}

fn default_snapshots() -> Vec<usize> {
    DEFAULT_SNAPSHOTS.to_vec()
}

/// A particle experiment: sampler, target, initial law and recorded metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub n_particles: usize,
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub sampler: SamplerSpec,
    pub potential: PotentialSpec,
    pub init: InitSpec,
    #[serde(default)]
    pub metrics: MetricsSpec,
    /// Filled in when the config is echoed into run metadata; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSpec {
    pub name: SamplerKind,
    pub eta: f64,
    /// Regularization `T` of the proximal samplers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default = "one")]
    pub beta: f64,
    /// Constant damping for `arwp-hb` and `klmc`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// ILA Lipschitz parameter, used as its damping knob.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default = "default_friction")]
    pub friction: f64,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub normalizer: Normalizer,
}

impl SamplerSpec {
    pub fn sampler_config(&self, seed: u64, max_iter: usize) -> Result<SamplerConfig> {
        let name = self.name;
        let need =
            |v: Option<f64>, what: &str| v.ok_or_else(|| CliError::config(format!("sampler `{name}` needs `{what}`")));
        let t = if name.is_interacting() {
            need(self.t, "t")?
        } else {
            self.t.unwrap_or(0.0)
        };
        let damping = match name {
            SamplerKind::ArwpHeavyBall | SamplerKind::Klmc => DampingSchedule::Constant(need(self.a, "a")?),
            SamplerKind::ArwpNesterov => DampingSchedule::Nesterov,
            _ => DampingSchedule::Constant(self.a.unwrap_or(1.0)),
        };
        let lipschitz = if name == SamplerKind::Ila {
            need(self.lipschitz, "lipschitz")?
        } else {
            1.0
        };
        let cfg = SamplerConfig {
            eta: self.eta,
            t,
            beta: self.beta,
            damping,
            mc_samples: self.mc_samples,
            normalizer: self.normalizer,
            seed,
            max_iter,
            lipschitz,
            friction: self.friction,
        };
        name.validate(&cfg)?;
        Ok(cfg)
    }
}

fn four_well() -> GaussianMixturePotential {
    GaussianMixturePotential::four_well()
}

fn default_centers() -> Vec<Vec<f64>> {
    four_well().centers().to_vec()
}

fn default_weights() -> Vec<f64> {
    four_well().weights()
}

fn default_bandwidths() -> Vec<f64> {
    four_well().bandwidths().to_vec()
}

fn default_rosenbrock_scale() -> f64 {
    RosenbrockPotential::default().scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `V(x) = x^T Lambda^{-1} x / 2`; give the diagonal `lambda` or a full `lambda_matrix`.
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_matrix: Option<Vec<Vec<f64>>>,
    },
    Rosenbrock {
        #[serde(default = "default_rosenbrock_scale")]
        scale: f64,
    },
    GaussianMixture {
        #[serde(default = "default_centers")]
        centers: Vec<Vec<f64>>,
        #[serde(default = "default_weights")]
        weights: Vec<f64>,
        /// Component variances.
        #[serde(default = "default_bandwidths")]
        bandwidths: Vec<f64>,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::config(format!("`{what}` must be a nonempty square matrix")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PotentialModel> {
        Ok(match self {
            PotentialSpec::Quadratic { lambda, lambda_matrix } => match (lambda, lambda_matrix) {
                (Some(diag), None) => PotentialModel::Quadratic(QuadraticPotential::diagonal(diag)?),
                (None, Some(rows)) => {
                    PotentialModel::Quadratic(QuadraticPotential::new(matrix_from_rows(rows, "lambda_matrix")?)?)
                }
                _ => {
                    return Err(CliError::config(
                        "quadratic potential needs exactly one of `lambda`, `lambda_matrix`",
                    ))
                }
            },
            PotentialSpec::Rosenbrock { scale } => {
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(CliError::config("rosenbrock scale must be positive"));
                }
                PotentialModel::Rosenbrock(RosenbrockPotential { scale: *scale })
            }
            PotentialSpec::GaussianMixture {
                centers,
                weights,
                bandwidths,
            } => PotentialModel::GaussianMixture(GaussianMixturePotential::new(
                centers.clone(),
                weights.clone(),
                bandwidths.clone(),
            )?),
        })
    }
}

/// Initial law `N(mean, cov)`; `cov` defaults to the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_diag: Option<Vec<f64>>,
}

impl InitSpec {
    pub fn build(&self, d: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if self.mean.len() != d {
            return Err(CliError::config(format!(
                "init mean has dimension {} but the potential has dimension {d}",
                self.mean.len()
            )));
        }
        let cov = match (&self.cov, &self.cov_diag) {
            (Some(rows), None) => matrix_from_rows(rows, "init.cov")?,
            (None, Some(diag)) => DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            (None, None) => DMatrix::identity(d, d),
            _ => return Err(CliError::config("init takes at most one of `cov`, `cov_diag`")),
        };
        if cov.nrows() != d {
            return Err(CliError::config(format!("init covariance must be {d}x{d}")));
        }
        Ok((DVector::from_column_slice(&self.mean), cov))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl: Option<KlSpec>,
    #[serde(default = "default_true")]
    pub trace_error: bool,
    #[serde(default = "default_snapshots")]
    pub snapshots: Vec<usize>,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            kl: None,
            trace_error: true,
            snapshots: default_snapshots(),
        }
    }
}

/// Grid KL of a Gaussian KDE against the target over the cube `[lo, hi]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlSpec {
    pub bandwidth: f64,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
    /// Evaluate every `every` iterations; other rows leave the column empty.
    #[serde(default = "default_every")]
    pub every: usize,
}

fn default_lo() -> f64 {
    -5.0
}

fn default_hi() -> f64 {
    5.0
}

fn default_mesh() -> f64 {
    0.01
}

fn default_every() -> usize {
    1
}

/// Provenance recorded next to the config echo in `metadata.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub version: String,
    pub parallel: bool,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_kl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_normalization: Option<String>,
    /// Log mass of the unnormalized target inside the KL box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_log_box_mass: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(CliError::config("n_particles must be at least 1"));
        }
        if let Some(kl) = &self.metrics.kl {
            if !(kl.bandwidth > 0.0) || !(kl.hi > kl.lo) || !(kl.mesh > 0.0) || kl.every == 0 {
                return Err(CliError::config(
                    "kl needs bandwidth > 0, hi > lo, mesh > 0 and every >= 1",
                ));
            }
            if !self.sampler.beta.is_finite() {
                return Err(CliError::config("kl against exp(-beta V) needs a finite beta"));
            }
        }
        let d = self.potential.build()?.dim();
        self.init.build(d)?;
        self.sampler.sampler_config(self.seed, self.max_iter)?;
        Ok(())
    }
}

/// Log-spaced, linearly spaced or explicit grid axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Values {
        values: Vec<f64>,
    },
    Range {
        lo: f64,
        hi: f64,
        n: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

impl AxisSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            AxisSpec::Values { values } => Ok(values.clone()),
            AxisSpec::Range { lo, hi, n, spacing } => {
                let (lo, hi, n) = (*lo, *hi, *n);
                if n == 0 {
                    return Ok(Vec::new());
                }
                if *spacing == Spacing::Log && !(lo > 0.0 && hi > 0.0) {
                    return Err(CliError::config("log-spaced axes need positive bounds"));
                }
                let frac = |i: usize| if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                Ok((0..n)
                    .map(|i| match spacing {
                        Spacing::Log => (lo.ln() + frac(i) * (hi.ln() - lo.ln())).exp(),
                        Spacing::Linear => lo + frac(i) * (hi - lo),
                    })
                    .collect())
            }
        }
    }
}

fn default_blowup() -> f64 {
    1e10
}

/// Damping/step-size phase diagram of the discrete covariance recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub lambda: f64,
    pub t: f64,
    pub init_sigma: f64,
    pub max_iter: usize,
    /// A cell counts as divergent once the variance exceeds this value.
    #[serde(default = "default_blowup")]
    pub blowup: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub a: AxisSpec,
    pub eta: AxisSpec,
}

/// Table of linearized rates against kinetic Langevin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Eigenvalues of `Lambda`.
    pub lambda: Vec<f64>,
    pub t: Vec<f64>,
    /// Damping values for the continuous rate column.
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: OptimalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_mode() -> OptimalMode {
    OptimalMode::MinCritical
}

pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|source| CliError::Parse {
        origin: origin.to_string(),
        source,
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse(&text, &path.display().to_string())
}
