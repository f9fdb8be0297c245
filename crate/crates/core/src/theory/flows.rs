use nalgebra::{DMatrix, DVector};

use super::closure::rwpo_gaussian_var;
use super::{check_positive, check_regularization, diagonal_of};
use crate::config::DampingSchedule;
use crate::error::{Error, Result};

/// Covariance `sigma` and momentum map `g` (with `P = G X`) at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub sigma: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub t: f64,
}

/// One eigendirection of a [`CovarianceState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarState {
    pub sigma: f64,
    pub g: f64,
    pub t: f64,
}

impl CovarianceState {
    pub fn diagonal(sigma: &[f64], g: &[f64]) -> Self {
        Self {
            sigma: DMatrix::from_diagonal(&DVector::from_column_slice(sigma)),
            g: DMatrix::from_diagonal(&DVector::from_column_slice(g)),
            t: 0.0,
        }
    }

    pub fn scalar(sigma: f64, g: f64) -> Self {
        Self::diagonal(&[sigma], &[g])
    }
}

fn rhs(sigma: f64, g: f64, lambda: f64, t_reg: f64, a: f64) -> Result<(f64, f64)> {
    let st = rwpo_gaussian_var(sigma, lambda, t_reg, 1.0)?;
    Ok((2.0 * g * sigma, -a * g - g * g - 1.0 / lambda + 1.0 / st))
}

/// RK4 integration of `sigma' = 2 g sigma`, `g' = -a g - g^2 - 1/lambda + 1/sigma_tilde`.
///
/// The step is `t_end / ceil(t_end / dt)`, so the last sample lands on `t_end`.
/// Returns every step including the initial state.
pub fn continuous_flow_1d(
    init: ScalarState,
    lambda: f64,
    t_reg: f64,
    a: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<ScalarState>> {
    check_positive(lambda, "lambda")?;
    check_regularization(t_reg, lambda)?;
    check_positive(dt, "dt")?;
    if !(a >= 0.0 && t_end >= 0.0) {
        return Err(Error::domain("damping and end time must be nonnegative"));
    }
    if !(init.sigma > 0.0) {
        return Err(Error::SpdViolation { time: init.t });
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = init;
    out.push(s);
    for k in 1..=steps {
        let time = init.t + k as f64 * h;
        let fail = |_| Error::SpdViolation { time };
        let (k1s, k1g) = rhs(s.sigma, s.g, lambda, t_reg, a).map_err(fail)?;
        let (k2s, k2g) = rhs(s.sigma + 0.5 * h * k1s, s.g + 0.5 * h * k1g, lambda, t_reg, a).map_err(fail)?;
        let (k3s, k3g) = rhs(s.sigma + 0.5 * h * k2s, s.g + 0.5 * h * k2g, lambda, t_reg, a).map_err(fail)?;
        let (k4s, k4g) = rhs(s.sigma + h * k3s, s.g + h * k3g, lambda, t_reg, a).map_err(fail)?;
        let sigma = s.sigma + h / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
        let g = s.g + h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        if !(sigma > 0.0 && sigma.is_finite() && g.is_finite()) {
            return Err(Error::SpdViolation { time });
        }
        s = ScalarState { sigma, g, t: time };
        out.push(s);
    }
    Ok(out)
}

/// [`continuous_flow_1d`] applied to each diagonal entry.
pub fn continuous_cov_flow(
    init: &CovarianceState,
    lambda: &DMatrix<f64>,
    t_reg: f64,
    a: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<CovarianceState>> {
    let (sig, g, lam) = diagonal_inputs(init, lambda)?;
    let mut per_dir = Vec::with_capacity(lam.len());
    for i in 0..lam.len() {
        let s0 = ScalarState {
            sigma: sig[i],
            g: g[i],
            t: init.t,
        };
        per_dir.push(continuous_flow_1d(s0, lam[i], t_reg, a, t_end, dt)?);
    }
    Ok(assemble(&per_dir))
}

/// Exact covariance recursion of particle ARWP on a Gaussian target:
///
/// ```text
/// g_k = c_k g_{k-1} / (1 + eta g_{k-1}) - eta (1/lambda - 1/sigma_tilde_k)
/// sigma_{k+1} = (1 + eta g_k)^2 sigma_k
/// ```
///
/// `init.g` plays the role of `g_{-1}`; particles starting at rest use 0.
/// Returns `k_max + 1` states with `t = k eta`.
pub fn discrete_flow_1d(
    init: ScalarState,
    lambda: f64,
    t_reg: f64,
    damping: DampingSchedule,
    eta: f64,
    k_max: usize,
) -> Result<Vec<ScalarState>> {
    check_positive(lambda, "lambda")?;
    check_regularization(t_reg, lambda)?;
    check_positive(eta, "eta")?;
    if !(init.sigma > 0.0) {
        return Err(Error::SpdViolation { time: init.t });
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut sigma = init.sigma;
    let mut g_prev = init.g;
    out.push(ScalarState {
        sigma,
        g: g_prev,
        t: 0.0,
    });
    for k in 0..k_max {
        let st = rwpo_gaussian_var(sigma, lambda, t_reg, 1.0).map_err(|_| Error::Diverged { iteration: k })?;
        let den = 1.0 + eta * g_prev;
        if den == 0.0 || !den.is_finite() {
            return Err(Error::SingularMomentum { iteration: k });
        }
        let c = damping.momentum_factor(eta, k);
        let g = c * g_prev / den - eta * (1.0 / lambda - 1.0 / st);
        let f = 1.0 + eta * g;
        sigma *= f * f;
        if !(sigma.is_finite() && g.is_finite()) {
            return Err(Error::Diverged { iteration: k + 1 });
        }
        if sigma == 0.0 {
            return Err(Error::SingularMomentum { iteration: k + 1 });
        }
        g_prev = g;
        out.push(ScalarState {
            sigma,
            g,
            t: (k + 1) as f64 * eta,
        });
    }
    Ok(out)
}

/// [`discrete_flow_1d`] applied to each diagonal entry.
pub fn discrete_cov_flow(
    init: &CovarianceState,
    lambda: &DMatrix<f64>,
    t_reg: f64,
    damping: DampingSchedule,
    eta: f64,
    k_max: usize,
) -> Result<Vec<CovarianceState>> {
    let (sig, g, lam) = diagonal_inputs(init, lambda)?;
    let mut per_dir = Vec::with_capacity(lam.len());
    for i in 0..lam.len() {
        let s0 = ScalarState {
            sigma: sig[i],
            g: g[i],
            t: 0.0,
        };
        per_dir.push(discrete_flow_1d(s0, lam[i], t_reg, damping, eta, k_max)?);
    }
    Ok(assemble(&per_dir))
}

type DiagonalInputs = (Vec<f64>, Vec<f64>, Vec<f64>);

fn diagonal_inputs(init: &CovarianceState, lambda: &DMatrix<f64>) -> Result<DiagonalInputs> {
    let sig = diagonal_of(&init.sigma, "sigma")?;
    let g = diagonal_of(&init.g, "g")?;
    let lam = diagonal_of(lambda, "lambda")?;
    if sig.len() != lam.len() || g.len() != lam.len() {
        return Err(Error::DimensionMismatch {
            expected: lam.len(),
            got: sig.len(),
        });
    }
    Ok((sig, g, lam))
}

fn assemble(per_dir: &[Vec<ScalarState>]) -> Vec<CovarianceState> {
    let len = per_dir[0].len();
    (0..len)
        .map(|k| {
            let sig: Vec<f64> = per_dir.iter().map(|d| d[k].sigma).collect();
            let g: Vec<f64> = per_dir.iter().map(|d| d[k].g).collect();
            CovarianceState {
                t: per_dir[0][k].t,
                ..CovarianceState::diagonal(&sig, &g)
            }
        })
        .collect()
}
