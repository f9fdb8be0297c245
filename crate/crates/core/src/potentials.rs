//! Target potentials `V` with analytic gradients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::cholesky_checked;
use crate::error::{Error, Result};

pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `grad V(x)` into `grad`.
    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    fn gradient_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient(x, &mut g);
        g
    }
}

/// `V(x) = x^T Lambda^{-1} x / 2`, the potential of `N(0, Lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential {
    lambda: DMatrix<f64>,
    lambda_inv: DMatrix<f64>,
}

impl QuadraticPotential {
    pub fn new(lambda: DMatrix<f64>) -> Result<Self> {
        if !lambda.is_square() {
            return Err(Error::InvalidCovariance("covariance must be square".into()));
        }
        let chol = cholesky_checked(&lambda)?;
        let inv = chol.inverse();
        let lambda_inv = (&inv + inv.transpose()) * 0.5;
        Ok(Self { lambda, lambda_inv })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn lambda_inv(&self) -> &DMatrix<f64> {
        &self.lambda_inv
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.lambda.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    pub fn condition_number(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, xc) in x.iter().enumerate() {
            let row: f64 = x.iter().enumerate().map(|(r, xr)| self.lambda_inv[(r, c)] * xr).sum();
            acc += row * xc;
        }
        0.5 * acc
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for (r, g) in grad.iter_mut().enumerate() {
            *g = x.iter().enumerate().map(|(c, xc)| self.lambda_inv[(r, c)] * xc).sum();
        }
    }
}

/// Scaled Rosenbrock function `V(x, y) = s [(1 - x)^2 + 100 (y - x^2)^2]` with `s = 1/20`.
///
/// The gradient is the exact derivative of `V`:
/// `s [-2(1 - x) - 400 x (y - x^2), 200 (y - x^2)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RosenbrockPotential {
    pub scale: f64,
}

impl Default for RosenbrockPotential {
    fn default() -> Self {
        Self { scale: 1.0 / 20.0 }
    }
}

impl Potential for RosenbrockPotential {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (u, v) = (x[0], x[1]);
        self.scale * ((1.0 - u).powi(2) + 100.0 * (v - u * u).powi(2))
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let (u, v) = (x[0], x[1]);
        let r = v - u * u;
        grad[0] = self.scale * (-2.0 * (1.0 - u) - 400.0 * u * r);
        grad[1] = self.scale * 200.0 * r;
    }
}

/// `V(x) = -log sum_i w_i exp(-|x - c_i|^2 / (2 s_i))` with bandwidths `s_i = sigma_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixturePotential {
    centers: Vec<Vec<f64>>,
    log_weights: Vec<f64>,
    bandwidths: Vec<f64>,
}

impl GaussianMixturePotential {
    pub fn new(centers: Vec<Vec<f64>>, weights: Vec<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        let k = centers.len();
        if k == 0 || weights.len() != k || bandwidths.len() != k {
            return Err(Error::config(format!(
                "mixture needs equal nonzero numbers of centers ({k}), weights ({}) and bandwidths ({})",
                weights.len(),
                bandwidths.len()
            )));
        }
        let d = centers[0].len();
        if d == 0 || centers.iter().any(|c| c.len() != d) {
            return Err(Error::config("mixture centers must share one nonzero dimension"));
        }
        if weights
            .iter()
            .chain(bandwidths.iter())
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::config("mixture weights and bandwidths must be positive"));
        }
        Ok(Self {
            centers,
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            bandwidths,
        })
    }

    /// Four wells: a large one at the origin and three smaller ones around it.
    pub fn four_well() -> Self {
        Self::new(
            vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![-3.0, -1.0], vec![-3.0, 1.0]],
            vec![1.0, 0.5, 0.5, 0.5],
            vec![0.5, 0.25, 0.25, 0.25],
        )
        .expect("built-in mixture is valid")
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    fn log_terms(&self, x: &[f64], out: &mut [f64]) {
        for (i, c) in self.centers.iter().enumerate() {
            let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            out[i] = self.log_weights[i] - r2 / (2.0 * self.bandwidths[i]);
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Potential for GaussianMixturePotential {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut terms = vec![0.0; self.centers.len()];
        self.log_terms(x, &mut terms);
        -log_sum_exp(&terms)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let mut terms = vec![0.0; self.centers.len()];
        self.log_terms(x, &mut terms);
        let lse = log_sum_exp(&terms);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (i, c) in self.centers.iter().enumerate() {
            let resp = (terms[i] - lse).exp();
            let s = resp / self.bandwidths[i];
            for k in 0..grad.len() {
                grad[k] += s * (x[k] - c[k]);
            }
        }
    }
}

/// Named potential selectable from configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialModel {
    Quadratic(QuadraticPotential),
    Rosenbrock(RosenbrockPotential),
    GaussianMixture(GaussianMixturePotential),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Quadratic,
    Rosenbrock,
    GaussianMixture,
}

impl PotentialModel {
    pub fn kind(&self) -> PotentialKind {
        match self {
            PotentialModel::Quadratic(_) => PotentialKind::Quadratic,
            PotentialModel::Rosenbrock(_) => PotentialKind::Rosenbrock,
            PotentialModel::GaussianMixture(_) => PotentialKind::GaussianMixture,
        }
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticPotential> {
        match self {
            PotentialModel::Quadratic(q) => Some(q),
            _ => None,
        }
    }
}

impl Potential for PotentialModel {
    fn dim(&self) -> usize {
        match self {
            PotentialModel::Quadratic(p) => p.dim(),
            PotentialModel::Rosenbrock(p) => p.dim(),
            PotentialModel::GaussianMixture(p) => p.dim(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            PotentialModel::Quadratic(p) => p.value(x),
            PotentialModel::Rosenbrock(p) => p.value(x),
            PotentialModel::GaussianMixture(p) => p.value(x),
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        match self {
            PotentialModel::Quadratic(p) => p.gradient(x, grad),
            PotentialModel::Rosenbrock(p) => p.gradient(x, grad),
            PotentialModel::GaussianMixture(p) => p.gradient(x, grad),
        }
    }
}

/// `grad V` at every particle, as a `d x N` matrix.
pub fn gradient_matrix<P: Potential + ?Sized>(p: &P, positions: &DMatrix<f64>) -> DMatrix<f64> {
    let d = positions.nrows();
    let mut out = DMatrix::zeros(d, positions.ncols());
    let src = positions.as_slice();
    crate::exec::for_each_column(out.as_mut_slice(), d, |j, g| {
        p.gradient(&src[j * d..(j + 1) * d], g);
    });
    out
}
