//! Particle experiments: the sampler loop, per-iteration metrics and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use arwp_core::metrics::{grid_kl_precomputed, kde_density, trace_error, GridSpec, TargetGrid};
use arwp_core::potentials::{Potential, PotentialModel};
use arwp_core::theory::RwpoGaussianMap;
use arwp_core::{ensemble_covariance, init_gaussian_ensemble, Error, ParticleEnsemble, SamplerConfig, SamplerKind};
use nalgebra::DMatrix;

use crate::config::{ExperimentConfig, KlSpec, RunInfo};
use crate::error::{CliError, Result};
use crate::plot;

pub const METRICS_HEADER: [&str; 4] = ["iteration", "kl", "trace_error", "wallclock_ms"];

/// Both densities are renormalized to unit mass over the box before the Riemann sum.
pub const KL_NORMALIZATION: &str = "target and estimate renormalized over the box";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub iteration: usize,
    pub kl: Option<f64>,
    pub trace_error: Option<f64>,
    pub wallclock_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub positions: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// One row per completed iteration, starting at 1.
    pub rows: Vec<MetricRow>,
    pub snapshots: Vec<Snapshot>,
    pub initial_kl: Option<f64>,
    pub target_log_box_mass: Option<f64>,
    /// Iteration whose state went non-finite, if any.
    pub diverged_at: Option<usize>,
    pub final_ensemble: ParticleEnsemble,
}

impl ExperimentReport {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn run_info(&self) -> RunInfo {
        RunInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            parallel: arwp_core::exec::is_parallel(),
            rows: self.rows.len(),
            diverged_at: self.diverged_at,
            initial_kl: self.initial_kl,
            kl_normalization: self.config.metrics.kl.as_ref().map(|_| KL_NORMALIZATION.to_string()),
            target_log_box_mass: self.target_log_box_mass,
        }
    }
}

struct KlProbe {
    grid: GridSpec,
    target: TargetGrid,
    bandwidth: f64,
    every: usize,
}

impl KlProbe {
    fn new(spec: &KlSpec, potential: &PotentialModel, beta: f64) -> Result<Self> {
        let grid = GridSpec::cube(potential.dim(), spec.lo, spec.hi, spec.mesh)?;
        let target = TargetGrid::normalized(&grid, |x| -beta * potential.value(x))?;
        Ok(Self {
            grid,
            target,
            bandwidth: spec.bandwidth,
            every: spec.every,
        })
    }

    fn eval(&self, e: &ParticleEnsemble) -> Result<f64> {
        let kde = kde_density(&e.positions, self.bandwidth, &self.grid)?;
        Ok(grid_kl_precomputed(&kde, &self.target)?)
    }
}

/// Covariance the sampler should settle at on a quadratic target.
///
/// Proximal samplers carry the `T`-dependent bias; the Langevin family targets `Lambda / beta`.
fn reference_covariance(
    potential: &PotentialModel,
    kind: SamplerKind,
    cfg: &SamplerConfig,
) -> Result<Option<DMatrix<f64>>> {
    let Some(q) = potential.as_quadratic() else {
        return Ok(None);
    };
    if kind.is_interacting() && cfg.t > 0.0 {
        return Ok(Some(
            RwpoGaussianMap::new(q.lambda(), cfg.t, cfg.beta)?.sigma_stationary,
        ));
    }
    Ok(Some(q.lambda() / cfg.beta))
}

/// Runs the configured sampler, recording metrics after every iteration.
///
/// A divergent step ends the run early; the report keeps everything recorded
/// before it and names the iteration in `diverged_at`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let potential = cfg.potential.build()?;
    let kind = cfg.sampler.name;
    let scfg = cfg.sampler.sampler_config(cfg.seed, cfg.max_iter)?;
    let (mean, cov) = cfg.init.build(potential.dim())?;
    let mut e = init_gaussian_ensemble(&mean, &cov, cfg.n_particles, cfg.seed)?;

    let probe = cfg
        .metrics
        .kl
        .as_ref()
        .map(|k| KlProbe::new(k, &potential, scfg.beta))
        .transpose()?;
    let sigma_star = if cfg.metrics.trace_error {
        reference_covariance(&potential, kind, &scfg)?
    } else {
        None
    };
    let trace_err = |e: &ParticleEnsemble| -> Result<Option<f64>> {
        match (&sigma_star, e.len() >= 2) {
            (Some(s), true) => Ok(Some(trace_error(&ensemble_covariance(e)?, s)?)),
            _ => Ok(None),
        }
    };

    let initial_kl = probe.as_ref().map(|p| p.eval(&e)).transpose()?;
    let mut snapshots = Vec::new();
    if cfg.metrics.snapshots.contains(&0) {
        snapshots.push(Snapshot {
            iteration: 0,
            positions: e.positions.clone(),
        });
    }
    let mut rows = Vec::with_capacity(cfg.max_iter);
    let mut diverged_at = None;
    for it in 1..=cfg.max_iter {
        let start = Instant::now();
        match kind.step(&e, &potential, &scfg) {
            Ok(next) => e = next,
            Err(Error::Diverged { iteration }) => {
                log::warn!("{kind} diverged at iteration {iteration}");
                diverged_at = Some(iteration);
                break;
            }
            Err(err) => return Err(err.into()),
        }
        let wallclock_ms = start.elapsed().as_secs_f64() * 1e3;
        let kl = match &probe {
            Some(p) if it % p.every == 0 || it == cfg.max_iter => Some(p.eval(&e)?),
            _ => None,
        };
        rows.push(MetricRow {
            iteration: it,
            kl,
            trace_error: trace_err(&e)?,
            wallclock_ms,
        });
        if cfg.metrics.snapshots.contains(&it) {
            snapshots.push(Snapshot {
                iteration: it,
                positions: e.positions.clone(),
            });
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        snapshots,
        initial_kl,
        target_log_box_mass: probe.as_ref().map(|p| p.target.log_box_mass),
        diverged_at,
        final_ensemble: e,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_csv(rows: &[MetricRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.iteration.to_string(),
            opt(r.kl),
            opt(r.trace_error),
            r.wallclock_ms.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One particle per line, coordinates separated by spaces.
pub fn snapshot_text(positions: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for col in positions.column_iter() {
        let line: Vec<String> = col.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// The config echo plus a `[run]` table; loading it as a config reproduces the run.
pub fn metadata_toml(report: &ExperimentReport) -> Result<String> {
    let mut echo = report.config.clone();
    echo.run = Some(report.run_info());
    Ok(toml::to_string(&echo)?)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(CliError::io(path))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

/// Writes `metrics.csv`, `snapshot_<iter>.txt`, `metadata.toml` and `plot.py`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(&report.rows)?)?;
    for s in &report.snapshots {
        write_file(
            &dir.join(format!("snapshot_{}.txt", s.iteration)),
            &snapshot_text(&s.positions),
        )?;
    }
    write_file(&dir.join("metadata.toml"), &metadata_toml(report)?)?;
    write_file(&dir.join("plot.py"), plot::RUN_SCRIPT)?;
    Ok(())
}
