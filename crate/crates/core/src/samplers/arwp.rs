use nalgebra::DMatrix;

use super::check_finite;
use crate::config::SamplerConfig;
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::potentials::{gradient_matrix, Potential};
use crate::rwpo::rwpo_score;

/// Proximal score at every particle.
///
/// At `T = 0` the kernel collapses onto each particle and the score tends to
/// its self-interaction value `-beta grad V / 2`.
pub fn proximal_score<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<DMatrix<f64>> {
    if !cfg.beta.is_finite() {
        return Err(Error::config("proximal samplers need a finite beta"));
    }
    if cfg.t == 0.0 {
        return Ok(gradient_matrix(p, &e.positions) * (-0.5 * cfg.beta));
    }
    match rwpo_score(e, p, cfg) {
        Ok(s) => Ok(s.scores),
        Err(Error::Domain(_)) => Err(Error::Diverged {
            iteration: e.iteration + 1,
        }),
        Err(err) => Err(err),
    }
}

/// Accelerated step: momentum first, then positions with the new momentum.
///
/// `P' = c_k P - eta (grad V + score / beta)`, `X' = X + eta P'`, where `c_k` is
/// `1 - a eta` for heavy-ball damping or `(k-1)/(k+2)` for Nesterov damping.
/// With the proximal score this is `c_k P - (eta/2) grad V + (eta/2T)(X - X S^T)`.
pub fn arwp_step<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ParticleEnsemble> {
    let score = proximal_score(e, p, cfg)?;
    arwp_step_with_score(e, p, cfg, &score)
}

/// [`arwp_step`] with a caller-supplied score matrix.
pub fn arwp_step_with_score<P: Potential + ?Sized>(
    e: &ParticleEnsemble,
    p: &P,
    cfg: &SamplerConfig,
    score: &DMatrix<f64>,
) -> Result<ParticleEnsemble> {
    check_shape(e, score)?;
    let grad = gradient_matrix(p, &e.positions);
    let c = cfg.damping.momentum_factor(cfg.eta, e.iteration);
    let inv_beta = 1.0 / cfg.beta;
    let momenta = e
        .momenta
        .zip_zip_map(&grad, score, |m, g, s| c * m - cfg.eta * (g + inv_beta * s));
    let positions = &e.positions + &momenta * cfg.eta;
    check_finite(ParticleEnsemble {
        positions,
        momenta,
        iteration: e.iteration + 1,
    })
}

/// First-order step `X' = X - eta (grad V + score / beta)`. Momenta are left untouched.
pub fn brwp_step<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ParticleEnsemble> {
    let score = proximal_score(e, p, cfg)?;
    brwp_step_with_score(e, p, cfg, &score)
}

pub fn brwp_step_with_score<P: Potential + ?Sized>(
    e: &ParticleEnsemble,
    p: &P,
    cfg: &SamplerConfig,
    score: &DMatrix<f64>,
) -> Result<ParticleEnsemble> {
    check_shape(e, score)?;
    let grad = gradient_matrix(p, &e.positions);
    let inv_beta = 1.0 / cfg.beta;
    let positions = e
        .positions
        .zip_zip_map(&grad, score, |x, g, s| x - cfg.eta * (g + inv_beta * s));
    check_finite(ParticleEnsemble {
        positions,
        momenta: e.momenta.clone(),
        iteration: e.iteration + 1,
    })
}

fn check_shape(e: &ParticleEnsemble, score: &DMatrix<f64>) -> Result<()> {
    if score.shape() != e.positions.shape() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: score.ncols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DampingSchedule;
    use crate::potentials::QuadraticPotential;

    fn cfg() -> SamplerConfig {
        SamplerConfig {
            eta: 0.1,
            t: 0.2,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn single_particle_at_minimum_is_fixed() {
        let q = QuadraticPotential::diagonal(&[1.0, 3.0]).unwrap();
        let e = ParticleEnsemble::new(DMatrix::zeros(2, 1));
        let a = arwp_step(&e, &q, &cfg()).unwrap();
        assert_eq!(a.positions, e.positions);
        assert_eq!(a.momenta, e.momenta);
        assert_eq!(a.iteration, 1);
        let b = brwp_step(&e, &q, &cfg()).unwrap();
        assert_eq!(b.positions, e.positions);
    }

    #[test]
    fn single_particle_follows_half_gradient() {
        // N = 1: the score is -beta grad V / 2, so momentum gains -(eta/2) grad V.
        let q = QuadraticPotential::diagonal(&[1.0]).unwrap();
        let e = ParticleEnsemble::from_points_1d(&[1.0]);
        let c = SamplerConfig {
            damping: DampingSchedule::Constant(2.0),
            ..cfg()
        };
        let next = arwp_step(&e, &q, &c).unwrap();
        assert!((next.momenta[(0, 0)] + 0.05).abs() < 1e-15);
        assert!((next.positions[(0, 0)] - 0.995).abs() < 1e-15);
        let b = brwp_step(&e, &q, &c).unwrap();
        assert!((b.positions[(0, 0)] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zero_regularization_uses_self_interaction_limit() {
        let q = QuadraticPotential::diagonal(&[1.0]).unwrap();
        let e = ParticleEnsemble::from_points_1d(&[1.0, -2.0]);
        let c = SamplerConfig { t: 0.0, ..cfg() };
        let s = proximal_score(&e, &q, &c).unwrap();
        assert_eq!(s[(0, 0)], -0.5);
        assert_eq!(s[(0, 1)], 1.0);
    }

    #[test]
    fn divergence_names_iteration() {
        let q = QuadraticPotential::diagonal(&[1.0]).unwrap();
        let mut e = ParticleEnsemble::from_points_1d(&[1e300, -1e300]);
        e.iteration = 4;
        let c = SamplerConfig { eta: 10.0, ..cfg() };
        let err = arwp_step(&e, &q, &c).unwrap_err();
        assert_eq!(err, Error::Diverged { iteration: 5 });
    }
}
