//! Score of the regularized Wasserstein proximal of an empirical measure.
//!
//! For particles `x_1..x_N` the kernel formula gives
//!
//! ```text
//! grad log WProx rho(x) = -beta grad V(x) / 2 - (beta / 2T) x + (beta / 2T) sum_j softmax_j(x) x_j
//! softmax_j(x) ∝ exp(-beta |x - x_j|^2 / (4T) - log Z(x_j))
//! ```
//!
//! where `Z(y)` is the Gaussian smoothing of `exp(-beta V / 2)` around `y`. The
//! constant `(4 pi T / beta)^{d/2}` is dropped everywhere since the softmax
//! cancels it.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{Normalizer, SamplerConfig};
use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::exec;
use crate::potentials::Potential;
use crate::rng::{RngStream, StreamPurpose};

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionData {
    pub log_z: DVector<f64>,
    pub w: DMatrix<f64>,
    pub softmax_w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    pub scores: DMatrix<f64>,
}

fn require_positive_t(cfg: &SamplerConfig) -> Result<()> {
    if cfg.t > 0.0 && cfg.t.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!("the proximal kernel needs T > 0, got {}", cfg.t)))
    }
}

fn require_finite_beta(cfg: &SamplerConfig) -> Result<()> {
    if cfg.beta.is_finite() {
        Ok(())
    } else {
        Err(Error::config("the proximal kernel needs a finite beta"))
    }
}

/// `log Z(y)` up to a shared additive constant.
///
/// Monte Carlo: log-mean-exp of `-beta V(z) / 2` over `z ~ N(y, (2T/beta) I)`.
/// Laplace: `-beta V(y) / 2`.
pub fn log_normalizer<P: Potential + ?Sized>(p: &P, y: &[f64], cfg: &SamplerConfig, rng: RngStream) -> Result<f64> {
    require_finite_beta(cfg)?;
    match cfg.normalizer {
        Normalizer::Laplace => Ok(-0.5 * cfg.beta * p.value(y)),
        Normalizer::MonteCarlo => {
            require_positive_t(cfg)?;
            if cfg.mc_samples == 0 {
                return Err(Error::config("mc_samples must be at least 1"));
            }
            let sd = (2.0 * cfg.t / cfg.beta).sqrt();
            let mut r = rng.rng();
            let mut z = vec![0.0; y.len()];
            let vals: Vec<f64> = (0..cfg.mc_samples)
                .map(|_| {
                    for (zk, yk) in z.iter_mut().zip(y) {
                        let xi: f64 = r.sample(StandardNormal);
                        *zk = yk + sd * xi;
                    }
                    -0.5 * cfg.beta * p.value(&z)
                })
                .collect();
            let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = vals.iter().map(|v| (v - m).exp()).sum();
            Ok(m + (s / cfg.mc_samples as f64).ln())
        }
    }
}

/// Normalizers of every particle, each from its own stream for this iteration.
pub fn log_normalizers<P: Potential + ?Sized>(
    e: &ParticleEnsemble,
    p: &P,
    cfg: &SamplerConfig,
) -> Result<DVector<f64>> {
    let vals = exec::map_indices(e.len(), |j| {
        let stream = RngStream::keyed(cfg.seed, StreamPurpose::Normalizer, e.iteration, j);
        log_normalizer(p, e.particle(j), cfg, stream)
    });
    let vals: Result<Vec<f64>> = vals.into_iter().collect();
    Ok(DVector::from_vec(vals?))
}

/// Explicit `N x N` interaction matrix and its row softmax.
pub fn interaction_matrix(e: &ParticleEnsemble, cfg: &SamplerConfig, log_z: &DVector<f64>) -> Result<InteractionData> {
    require_positive_t(cfg)?;
    require_finite_beta(cfg)?;
    let n = e.len();
    if log_z.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: log_z.len(),
        });
    }
    let c = cfg.beta / (4.0 * cfg.t);
    let w = DMatrix::from_fn(n, n, |i, j| -c * sq_dist(e.particle(i), e.particle(j)) - log_z[j]);
    let mut softmax_w = w.clone();
    for i in 0..n {
        let m = (0..n).map(|j| w[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for j in 0..n {
            let v = (w[(i, j)] - m).exp();
            softmax_w[(i, j)] = v;
            s += v;
        }
        for j in 0..n {
            softmax_w[(i, j)] /= s;
        }
    }
    Ok(InteractionData {
        log_z: log_z.clone(),
        w,
        softmax_w,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Softmax-weighted mean `sum_j softmax_j(x) x_j` for each query column `x`.
///
/// Rows are streamed, so memory stays `O(d N)` for any number of queries.
pub fn softmax_mean(
    queries: &DMatrix<f64>,
    sources: &DMatrix<f64>,
    log_z: &DVector<f64>,
    t: f64,
    beta: f64,
) -> DMatrix<f64> {
    let d = sources.nrows();
    let n = sources.ncols();
    let src = sources.as_slice();
    let qs = queries.as_slice();
    let c = beta / (4.0 * t);
    let mut out = DMatrix::zeros(d, queries.ncols());
    exec::for_each_column(out.as_mut_slice(), d, |i, mean| {
        let x = &qs[i * d..(i + 1) * d];
        let logits: Vec<f64> = (0..n)
            .map(|j| -c * sq_dist(x, &src[j * d..(j + 1) * d]) - log_z[j])
            .collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        mean.iter_mut().for_each(|v| *v = 0.0);
        for (j, l) in logits.iter().enumerate() {
            let wj = (l - m).exp();
            s += wj;
            for k in 0..d {
                mean[k] += wj * src[j * d + k];
            }
        }
        mean.iter_mut().for_each(|v| *v /= s);
    });
    out
}

/// Score of the proximal of the empirical measure on `sources`, evaluated at `queries`.
pub fn rwpo_score_at<P: Potential + ?Sized>(
    queries: &DMatrix<f64>,
    sources: &DMatrix<f64>,
    log_z: &DVector<f64>,
    p: &P,
    cfg: &SamplerConfig,
) -> Result<ScoreField> {
    require_positive_t(cfg)?;
    require_finite_beta(cfg)?;
    if log_z.len() != sources.ncols() {
        return Err(Error::DimensionMismatch {
            expected: sources.ncols(),
            got: log_z.len(),
        });
    }
    if queries.nrows() != sources.nrows() || p.dim() != sources.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sources.nrows(),
            got: queries.nrows(),
        });
    }
    let d = queries.nrows();
    let mut scores = softmax_mean(queries, sources, log_z, cfg.t, cfg.beta);
    let qs = queries.as_slice();
    let (b, k) = (cfg.beta, cfg.beta / (2.0 * cfg.t));
    exec::for_each_column(scores.as_mut_slice(), d, |i, s| {
        let x = &qs[i * d..(i + 1) * d];
        let g = p.gradient_vec(x);
        for r in 0..d {
            s[r] = -0.5 * b * g[r] - k * (x[r] - s[r]);
        }
    });
    if !scores.iter().all(|v| v.is_finite()) {
        return Err(Error::domain("non-finite proximal score"));
    }
    Ok(ScoreField { scores })
}

/// Score at every particle of the ensemble, with fresh normalizers for this iteration.
pub fn rwpo_score<P: Potential + ?Sized>(e: &ParticleEnsemble, p: &P, cfg: &SamplerConfig) -> Result<ScoreField> {
    require_positive_t(cfg)?;
    let log_z = log_normalizers(e, p, cfg)?;
    rwpo_score_at(&e.positions, &e.positions, &log_z, p, cfg)
}
