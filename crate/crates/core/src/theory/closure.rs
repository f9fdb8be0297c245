use nalgebra::DMatrix;

use super::{check_positive, check_regularization};
use crate::error::{Error, Result};

/// `k_+ = 1 + T/lambda`.
fn k_plus(lambda: f64, t: f64) -> f64 {
    1.0 + t / lambda
}

/// Variance after the proximal map: `2T/(beta k_+) + sigma / k_+^2`.
pub fn rwpo_gaussian_var(sigma: f64, lambda: f64, t: f64, beta: f64) -> Result<f64> {
    check_positive(lambda, "lambda")?;
    check_positive(beta, "beta")?;
    check_regularization(t, lambda)?;
    if !(sigma >= 0.0) {
        return Err(Error::domain(format!("variance must be nonnegative, got {sigma}")));
    }
    let kp = k_plus(lambda, t);
    Ok(2.0 * t / (beta * kp) + sigma / (kp * kp))
}

/// Exact inverse of [`rwpo_gaussian_var`] at `beta = 1`: `k_+^2 sigma_tilde - 2T k_+`.
///
/// At `sigma_tilde = lambda` this is `k_+ lambda k_-`.
pub fn rwpo_gaussian_var_inverse(sigma_tilde: f64, lambda: f64, t: f64) -> Result<f64> {
    check_positive(lambda, "lambda")?;
    check_regularization(t, lambda)?;
    let kp = k_plus(lambda, t);
    let sigma = kp * kp * sigma_tilde - 2.0 * t * kp;
    if !(sigma > 0.0) {
        return Err(Error::domain(format!(
            "sigma_tilde = {sigma_tilde} is at or below the floor 2T/k_+ = {}",
            2.0 * t / kp
        )));
    }
    Ok(sigma)
}

/// Stationary variance `k_+ lambda k_- = lambda - T^2/lambda`.
pub fn stationary_var(lambda: f64, t: f64) -> f64 {
    (lambda + t) * (lambda - t) / lambda
}

/// The proximal covariance map for a fixed target covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct RwpoGaussianMap {
    pub k_plus: DMatrix<f64>,
    pub k_minus: DMatrix<f64>,
    pub sigma_stationary: DMatrix<f64>,
    lambda: DMatrix<f64>,
    t: f64,
    beta: f64,
}

impl RwpoGaussianMap {
    pub fn new(lambda: &DMatrix<f64>, t: f64, beta: f64) -> Result<Self> {
        check_positive(beta, "beta")?;
        let ev = spd_eigenvalues(lambda, "lambda")?;
        check_regularization(t, ev[0])?;
        let n = lambda.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let lambda_inv = lambda
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("lambda".into()))?
            .inverse();
        let k_plus = &id + &lambda_inv * t;
        let k_minus = &id - &lambda_inv * t;
        // Solves the forward map for sigma_tilde = lambda.
        let sigma_stationary = symmetrize(&(&k_plus * lambda * &k_plus - &k_plus * (2.0 * t / beta)));
        Ok(Self {
            k_plus,
            k_minus,
            sigma_stationary,
            lambda: lambda.clone(),
            t,
            beta,
        })
    }

    pub fn forward(&self, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_commutes(sigma)?;
        let kinv = self.k_plus_inverse();
        let out = &kinv * (2.0 * self.t / self.beta) + &kinv * sigma * &kinv;
        Ok(symmetrize(&out))
    }

    pub fn inverse(&self, sigma_tilde: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_commutes(sigma_tilde)?;
        let out = symmetrize(&(&self.k_plus * sigma_tilde * &self.k_plus - &self.k_plus * (2.0 * self.t / self.beta)));
        spd_eigenvalues(&out, "inverse image")
            .map_err(|_| Error::domain("sigma_tilde lies at or below the floor 2T K_+^{-1}"))?;
        Ok(out)
    }

    fn k_plus_inverse(&self) -> DMatrix<f64> {
        self.k_plus.clone().try_inverse().expect("K_+ is positive definite")
    }

    fn check_commutes(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.shape() != self.lambda.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.lambda.nrows(),
                got: m.nrows(),
            });
        }
        let comm = m * &self.lambda - &self.lambda * m;
        let scale = (m.abs().max() * self.lambda.abs().max()).max(f64::MIN_POSITIVE);
        if comm.abs().max() > 1e-10 * scale {
            return Err(Error::NonCommuting("covariance does not commute with lambda".into()));
        }
        Ok(())
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn spd_eigenvalues(m: &DMatrix<f64>, what: &str) -> Result<Vec<f64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::InvalidCovariance(format!("{what} must be square and nonempty")));
    }
    if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
        return Err(Error::InvalidCovariance(format!("{what} is not symmetric")));
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    if !(ev[0] > 0.0) {
        return Err(Error::InvalidCovariance(format!("{what} is not positive definite")));
    }
    Ok(ev)
}

/// `2 beta^{-1} T K_+^{-1} + K_+^{-1} Sigma K_+^{-1}` with `K_+ = I + T Lambda^{-1}`.
pub fn rwpo_gaussian_cov(sigma: &DMatrix<f64>, lambda: &DMatrix<f64>, t: f64, beta: f64) -> Result<DMatrix<f64>> {
    RwpoGaussianMap::new(lambda, t, beta)?.forward(sigma)
}

/// Inverse of [`rwpo_gaussian_cov`] at `beta = 1`.
pub fn rwpo_gaussian_cov_inverse(sigma_tilde: &DMatrix<f64>, lambda: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    RwpoGaussianMap::new(lambda, t, 1.0)?.inverse(sigma_tilde)
}
