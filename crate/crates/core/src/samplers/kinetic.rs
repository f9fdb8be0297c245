use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::check_finite;
use crate::config::SamplerConfig;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::exec;
use crate::potentials::Potential;
use crate::rng::{RngStream, StreamPurpose};

/// Inertia `1 - epsilon dt` and gradient step `dt^2 / L` of the inertial Langevin algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlaCoefficients {
    pub inertia: f64,
    pub tau: f64,
}

pub fn ila_coefficients(dt: f64, friction: f64, lipschitz: f64) -> Result<IlaCoefficients> {
    if !(lipschitz > 0.0) || !(friction > 0.0) || !(dt >= 0.0) {
        return Err(Error::config(format!(
            "ila needs dt >= 0, friction > 0 and L > 0 (got dt={dt}, friction={friction}, L={lipschitz})"
        )));
    }
    let inertia = 1.0 - friction * dt;
    if inertia <= 0.0 {
        log::warn!("ila inertia 1 - friction*dt = {inertia} is not positive");
    }
    Ok(IlaCoefficients {
        inertia,
        tau: dt * dt / lipschitz,
    })
}

/// Inertial Langevin step with the momentum stored as the last displacement:
///
/// ```text
/// x' = x + b p - tau grad V(x) + sqrt(2 (1 - b) tau / beta) xi
/// p' = x' - x
/// ```
///
/// The noise scale makes `exp(-beta V)` the invariant law of the underlying
/// damped dynamics for every step size.
pub fn ila_step<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ParticleEnsemble> {
    let coeffs = ila_coefficients(cfg.eta, cfg.friction, cfg.lipschitz)?;
    ila_update(e, p, coeffs, cfg.beta, cfg.seed)
}

pub fn ila_update<P: Potential + ?Sized>(
    e: &ParticleEnsemble,
    p: &P,
    coeffs: IlaCoefficients,
    beta: f64,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let d = e.dim();
    let sd = (2.0 * (1.0 - coeffs.inertia).max(0.0) * coeffs.tau / beta).sqrt();
    let src = e.positions.as_slice();
    let mut positions = e.positions.clone();
    let mut momenta = e.momenta.clone();
    exec::for_each_column_pair(positions.as_mut_slice(), momenta.as_mut_slice(), d, |j, x, m| {
        let mut rng = RngStream::keyed(seed, StreamPurpose::Langevin, e.iteration, j).rng();
        let g = p.gradient_vec(&src[j * d..(j + 1) * d]);
        for k in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            let step = coeffs.inertia * m[k] - coeffs.tau * g[k] + sd * xi;
            x[k] += step;
            m[k] = step;
        }
    });
    check_finite(ParticleEnsemble {
        positions,
        momenta,
        iteration: e.iteration + 1,
    })
}

/// Exponential-integrator coefficients of kinetic Langevin dynamics over one step.
///
/// `noise_cov` is the per-dimension covariance of `(momentum noise, position noise)`
/// before the `2a/beta` scaling:
/// `[[int psi0^2, int psi0 psi1], [int psi0 psi1, int psi1^2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlmcCoefficients {
    pub psi0: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub noise_cov: Matrix2<f64>,
}

pub fn klmc_coefficients(a: f64, eta: f64) -> Result<KlmcCoefficients> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::config(format!("klmc damping must be positive, got {a}")));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::config(format!("klmc step must be nonnegative, got {eta}")));
    }
    let x = a * eta;
    let e1 = (-x).exp_m1(); // e^{-a eta} - 1
    let e2 = (-2.0 * x).exp_m1(); // e^{-2 a eta} - 1
    let psi0 = (-x).exp();
    let psi1 = -e1 / a;
    let psi2 = (x + e1) / (a * a);
    let c00 = -e2 / (2.0 * a);
    let c01 = e1 * e1 / (2.0 * a * a);
    let c11 = (2.0 * x - e2 + 4.0 * e1) / (2.0 * a * a * a);
    Ok(KlmcCoefficients {
        psi0,
        psi1,
        psi2,
        noise_cov: Matrix2::new(c00, c01, c01, c11.max(0.0)),
    })
}

/// Kinetic Langevin step:
///
/// ```text
/// x' = x + psi1 p - psi2 grad V(x) + position noise
/// p' = psi0 p - psi1 grad V(x) + momentum noise
/// ```
///
/// with correlated noise of covariance `(2a/beta) noise_cov` per dimension.
pub fn klmc_step<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ParticleEnsemble> {
    let a = cfg
        .damping
        .constant()
        .ok_or_else(|| Error::config("klmc needs constant damping"))?;
    let k = klmc_coefficients(a, cfg.eta)?;
    let scale = (2.0 * a / cfg.beta).sqrt();
    let c = k.noise_cov;
    let l00 = c[(0, 0)].sqrt();
    let l10 = if l00 > 0.0 { c[(1, 0)] / l00 } else { 0.0 };
    let l11 = (c[(1, 1)] - l10 * l10).max(0.0).sqrt();

    let d = e.dim();
    let src = e.positions.as_slice();
    let mut positions = e.positions.clone();
    let mut momenta = e.momenta.clone();
    exec::for_each_column_pair(positions.as_mut_slice(), momenta.as_mut_slice(), d, |j, x, m| {
        let mut rng = RngStream::keyed(cfg.seed, StreamPurpose::Langevin, e.iteration, j).rng();
        let g = p.gradient_vec(&src[j * d..(j + 1) * d]);
        for r in 0..d {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let noise_p = scale * l00 * z0;
            let noise_x = scale * (l10 * z0 + l11 * z1);
            let p0 = m[r];
            x[r] += k.psi1 * p0 - k.psi2 * g[r] + noise_x;
            m[r] = k.psi0 * p0 - k.psi1 * g[r] + noise_p;
        }
    });
    check_finite(ParticleEnsemble {
        positions,
        momenta,
        iteration: e.iteration + 1,
    })
}
