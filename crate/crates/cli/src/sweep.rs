//! Damping/step-size phase diagrams of the discrete covariance recursion.

use std::path::Path;

use arwp_core::config::DampingSchedule;
use arwp_core::exec;
use arwp_core::theory::{discrete_flow_1d, stationary_var, ScalarState};

use crate::config::SweepConfig;
use crate::error::{CliError, Result};
use crate::experiment::{ensure_dir, write_file};
use crate::plot;

pub const SWEEP_HEADER: [&str; 3] = ["a", "eta", "error_or_sentinel"];

/// Written in place of the error for divergent cells.
pub const DIVERGED: &str = "inf";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub a: f64,
    pub eta: f64,
    /// `|sigma_K - sigma_inf|`, or `None` when the recursion diverged.
    pub error: Option<f64>,
}

impl SweepCell {
    pub fn diverged(&self) -> bool {
        self.error.is_none()
    }
}

fn cell(cfg: &SweepConfig, a: f64, eta: f64, sigma_inf: f64) -> SweepCell {
    let init = ScalarState {
        sigma: cfg.init_sigma,
        g: 0.0,
        t: 0.0,
    };
    let error = match discrete_flow_1d(init, cfg.lambda, cfg.t, DampingSchedule::Constant(a), eta, cfg.max_iter) {
        Ok(traj) if traj.iter().all(|s| s.sigma <= cfg.blowup) => {
            Some((traj.last().map_or(cfg.init_sigma, |s| s.sigma) - sigma_inf).abs())
        }
        _ => None,
    };
    SweepCell { a, eta, error }
}

/// Runs the recursion on every `(a, eta)` cell; rows are ordered by `a`, then `eta`.
pub fn phase_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    if !(cfg.lambda > 0.0) || !(cfg.t >= 0.0 && cfg.t < cfg.lambda) || !(cfg.init_sigma > 0.0) {
        return Err(CliError::config(
            "sweep needs lambda > 0, 0 <= T < lambda and init_sigma > 0",
        ));
    }
    let a = cfg.a.values()?;
    let eta = cfg.eta.values()?;
    if a.iter().chain(&eta).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(CliError::config("sweep axes must be positive"));
    }
    let sigma_inf = stationary_var(cfg.lambda, cfg.t);
    let ne = eta.len();
    Ok(exec::map_indices(a.len() * ne, |idx| {
        cell(cfg, a[idx / ne], eta[idx % ne], sigma_inf)
    }))
}

pub fn sweep_csv(cells: &[SweepCell]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for c in cells {
        let err = c.error.map_or_else(|| DIVERGED.to_string(), |e| e.to_string());
        w.write_record([c.a.to_string(), c.eta.to_string(), err])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_sweep(cfg: &SweepConfig, cells: &[SweepCell], dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(cells)?)?;
    write_file(&dir.join("metadata.toml"), &toml::to_string(cfg)?)?;
    write_file(&dir.join("plot.py"), plot::SWEEP_SCRIPT)?;
    Ok(())
}
