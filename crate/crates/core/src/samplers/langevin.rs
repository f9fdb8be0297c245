use rand::Rng;
use rand_distr::StandardNormal;

use super::check_finite;
use crate::config::SamplerConfig;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::exec;
use crate::potentials::Potential;
use crate::rng::{RngStream, StreamPurpose};

fn noise_scale(cfg: &SamplerConfig) -> f64 {
    (2.0 * cfg.eta / cfg.beta).sqrt()
}

/// Euler-Maruyama step of overdamped Langevin: `x - eta grad V(x) + sqrt(2 eta / beta) xi`.
pub fn ula_step<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ParticleEnsemble> {
    let d = e.dim();
    let sd = noise_scale(cfg);
    let src = e.positions.as_slice();
    let mut positions = e.positions.clone();
    exec::for_each_column(positions.as_mut_slice(), d, |j, x| {
        let mut rng = RngStream::keyed(cfg.seed, StreamPurpose::Langevin, e.iteration, j).rng();
        let g = p.gradient_vec(&src[j * d..(j + 1) * d]);
        for k in 0..d {
            let xi: f64 = rng.sample(StandardNormal);
            x[k] += -cfg.eta * g[k] + sd * xi;
        }
    });
    check_finite(ParticleEnsemble {
        positions,
        momenta: e.momenta.clone(),
        iteration: e.iteration + 1,
    })
}

/// Log Metropolis-Hastings ratio for moving from `x` to `y` under the Langevin proposal.
pub fn mala_log_acceptance<P: Potential + ?Sized>(p: &P, x: &[f64], y: &[f64], cfg: &SamplerConfig) -> f64 {
    let gx = p.gradient_vec(x);
    let gy = p.gradient_vec(y);
    let mut forward = 0.0;
    let mut backward = 0.0;
    for k in 0..x.len() {
        let f = y[k] - x[k] + cfg.eta * gx[k];
        let b = x[k] - y[k] + cfg.eta * gy[k];
        forward += f * f;
        backward += b * b;
    }
    -cfg.beta * (p.value(y) - p.value(x)) - cfg.beta / (4.0 * cfg.eta) * (backward - forward)
}

/// Metropolis-adjusted Langevin step. Rejected particles stay where they are.
pub fn mala_step<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ParticleEnsemble> {
    mala_step_counted(e, p, cfg).map(|(next, _)| next)
}

/// [`mala_step`] that also returns the number of accepted proposals.
pub fn mala_step_counted<P: Potential + ?Sized>(
    e: &ParticleEnsemble,
    p: &P,
    cfg: &SamplerConfig,
) -> Result<(ParticleEnsemble, usize)> {
    if !cfg.beta.is_finite() {
        return Err(Error::config("mala needs a finite beta"));
    }
    let d = e.dim();
    let sd = noise_scale(cfg);
    let accepted = exec::map_indices(e.len(), |j| {
        let x = e.particle(j);
        let mut rng = RngStream::keyed(cfg.seed, StreamPurpose::Langevin, e.iteration, j).rng();
        let g = p.gradient_vec(x);
        let y: Vec<f64> = (0..d)
            .map(|k| {
                let xi: f64 = rng.sample(StandardNormal);
                x[k] - cfg.eta * g[k] + sd * xi
            })
            .collect();
        let log_alpha = mala_log_acceptance(p, x, &y, cfg);
        let u: f64 = rng.random();
        if log_alpha >= 0.0 || u.ln() < log_alpha {
            Some(y)
        } else {
            None
        }
    });
    let mut positions = e.positions.clone();
    let mut count = 0;
    for (j, y) in accepted.into_iter().enumerate() {
        if let Some(y) = y {
            positions.column_mut(j).copy_from_slice(&y);
            count += 1;
        }
    }
    let next = check_finite(ParticleEnsemble {
        positions,
        momenta: e.momenta.clone(),
        iteration: e.iteration + 1,
    })?;
    Ok((next, count))
}
