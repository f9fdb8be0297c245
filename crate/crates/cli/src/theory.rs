//! Rate tables: linearized ARWP rates next to the kinetic Langevin baseline.

use std::path::Path;

use arwp_core::theory::{kinetic_langevin_rate, linearized_rate_cts, optimal_params_for_spectrum, OptimalMode};

use crate::config::TheoryConfig;
use crate::error::{CliError, Result};
use crate::experiment::{ensure_dir, write_file};
use crate::plot;

pub const THEORY_HEADER: [&str; 12] = [
    "t",
    "a",
    "lambda_min",
    "lambda_max",
    "kappa",
    "within_hypothesis",
    "rate_cts",
    "opt_a",
    "opt_eta",
    "arwp_rate",
    "klmc_rate",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub t: f64,
    pub a: Option<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    /// `T <= lambda_min / (1 + sqrt 2)`, where the optimal-parameter formulas hold as stated.
    pub within_hypothesis: bool,
    pub rate_cts: Option<f64>,
    pub opt_a: Option<f64>,
    pub opt_eta: Option<f64>,
    pub arwp_rate: Option<f64>,
    pub klmc_rate: Option<f64>,
    /// `ok`, or the reason the row could not be evaluated.
    pub status: String,
}

fn row(lambda: &[f64], lmin: f64, lmax: f64, t: f64, a: Option<f64>, mode: OptimalMode) -> TheoryRow {
    let kappa = lmax / lmin;
    let mut r = TheoryRow {
        t,
        a,
        lambda_min: lmin,
        lambda_max: lmax,
        kappa,
        within_hypothesis: t >= 0.0 && t <= lmin / (1.0 + std::f64::consts::SQRT_2),
        rate_cts: None,
        opt_a: None,
        opt_eta: None,
        arwp_rate: None,
        klmc_rate: kinetic_langevin_rate(kappa).ok(),
        status: "ok".into(),
    };
    let mut errors = Vec::new();
    if let Some(a) = a {
        match linearized_rate_cts(lmin, lmax, t, a) {
            Ok(v) => r.rate_cts = Some(v),
            Err(e) => errors.push(e.to_string()),
        }
    }
    match optimal_params_for_spectrum(lambda, t, mode) {
        Ok(p) => {
            r.opt_a = Some(p.a);
            r.opt_eta = Some(p.eta);
            r.arwp_rate = Some(p.rate);
        }
        Err(e) => errors.push(e.to_string()),
    }
    if !errors.is_empty() {
        errors.dedup();
        r.status = errors.join("; ");
    }
    r
}

/// One row per `(T, a)` pair; with no damping values, one row per `T`.
pub fn theory_report(cfg: &TheoryConfig) -> Result<Vec<TheoryRow>> {
    if cfg.lambda.is_empty() || cfg.lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(CliError::config("theory needs a nonempty positive spectrum `lambda`"));
    }
    let lmin = cfg.lambda.iter().copied().fold(f64::INFINITY, f64::min);
    let lmax = cfg.lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a_list: Vec<Option<f64>> = if cfg.a.is_empty() {
        vec![None]
    } else {
        cfg.a.iter().map(|&a| Some(a)).collect()
    };
    let mut rows = Vec::new();
    for &t in &cfg.t {
        for &a in &a_list {
            rows.push(row(&cfg.lambda, lmin, lmax, t, a, cfg.mode));
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn theory_csv(rows: &[TheoryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(THEORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            opt(r.a),
            r.lambda_min.to_string(),
            r.lambda_max.to_string(),
            r.kappa.to_string(),
            r.within_hypothesis.to_string(),
            opt(r.rate_cts),
            opt(r.opt_a),
            opt(r.opt_eta),
            opt(r.arwp_rate),
            opt(r.klmc_rate),
            r.status.clone(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_theory(cfg: &TheoryConfig, rows: &[TheoryRow], dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("theory.csv"), &theory_csv(rows)?)?;
    write_file(&dir.join("metadata.toml"), &toml::to_string(cfg)?)?;
    write_file(&dir.join("plot.py"), plot::THEORY_SCRIPT)?;
    Ok(())
}
