use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{RngStream, StreamPurpose};

/// Positions and momenta of `N` particles in `R^d`, one particle per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: DMatrix<f64>,
    pub momenta: DMatrix<f64>,
    pub iteration: usize,
}

impl ParticleEnsemble {
    /// Ensemble at iteration 0 with zero momenta.
    pub fn new(positions: DMatrix<f64>) -> Self {
        let momenta = DMatrix::zeros(positions.nrows(), positions.ncols());
        Self {
            positions,
            momenta,
            iteration: 0,
        }
    }

    pub fn with_momenta(positions: DMatrix<f64>, momenta: DMatrix<f64>) -> Result<Self> {
        if positions.shape() != momenta.shape() {
            return Err(Error::config(format!(
                "positions {:?} and momenta {:?} differ in shape",
                positions.shape(),
                momenta.shape()
            )));
        }
        Ok(Self {
            positions,
            momenta,
            iteration: 0,
        })
    }

    /// One-dimensional ensemble from a list of points.
    pub fn from_points_1d(points: &[f64]) -> Self {
        Self::new(DMatrix::from_row_slice(1, points.len(), points))
    }

    pub fn dim(&self) -> usize {
        self.positions.nrows()
    }

    pub fn len(&self) -> usize {
        self.positions.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.ncols() == 0
    }

    pub fn particle(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.positions.as_slice()[j * d..(j + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(self.momenta.iter()).all(|v| v.is_finite())
    }
}

/// Draws `n` particles from `N(mean, cov)` with zero momenta.
///
/// Particle `j` uses its own stream, so the ensemble does not depend on the
/// thread count.
pub fn init_gaussian_ensemble(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let d = mean.len();
    if cov.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cov.nrows(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewParticles { needed: 1, got: 0 });
    }
    let chol = cholesky_checked(cov)?;
    let l = chol.l();
    let mut positions = DMatrix::zeros(d, n);
    exec::for_each_column(positions.as_mut_slice(), d, |j, col| {
        let mut rng = RngStream::keyed(seed, StreamPurpose::Init, 0, j).rng();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for r in 0..d {
            let mut acc = mean[r];
            for c in 0..=r {
                acc += l[(r, c)] * z[c];
            }
            col[r] = acc;
        }
    });
    Ok(ParticleEnsemble::new(positions))
}

pub(crate) fn cholesky_checked(cov: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let asym = (cov - cov.transpose()).abs().max();
    let scale = cov.abs().max().max(1.0);
    if !cov.iter().all(|v| v.is_finite()) || asym > 1e-12 * scale {
        return Err(Error::InvalidCovariance("matrix is not symmetric".into()));
    }
    cov.clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("Cholesky factorization failed".into()))
}

pub fn ensemble_mean(e: &ParticleEnsemble) -> DVector<f64> {
    let n = e.len().max(1) as f64;
    e.positions.column_sum() / n
}

/// Population covariance `(1/N) sum_i (x_i - mean)(x_i - mean)^T`.
pub fn ensemble_covariance(e: &ParticleEnsemble) -> Result<DMatrix<f64>> {
    let n = e.len();
    if n < 2 {
        return Err(Error::TooFewParticles { needed: 2, got: n });
    }
    let mean = ensemble_mean(e);
    let mut centered = e.positions.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let cov = &centered * centered.transpose() / n as f64;
    Ok((&cov + cov.transpose()) * 0.5)
}
