//! Closed-form Gaussian analysis of the proximal samplers.
//!
//! For a quadratic potential `V(x) = x^T Lambda^{-1} x / 2` the proximal map
//! sends centred Gaussians to centred Gaussians, so the particle dynamics
//! reduce to flows on covariance matrices. Everything here assumes that all
//! matrices are simultaneously diagonal and works per eigendirection. The
//! inverse temperature is 1 unless a function takes `beta` explicitly.

mod closure;
mod flows;
mod linearized;
mod lyapunov;

pub use closure::{
    rwpo_gaussian_cov, rwpo_gaussian_cov_inverse, rwpo_gaussian_var, rwpo_gaussian_var_inverse, stationary_var,
    RwpoGaussianMap,
};
pub use flows::{
    continuous_cov_flow, continuous_flow_1d, discrete_cov_flow, discrete_flow_1d, CovarianceState, ScalarState,
};
pub use linearized::{
    critical_damping, h_ratio, kinetic_langevin_rate, klmc_cov_matrix, linearized_rate_cts, linearized_update_matrix,
    optimal_params, optimal_params_for_spectrum, KlmcMoments, LinearizedSystem, OptimalMode, OptimalParams,
};
pub use lyapunov::{kl_gaussian, kl_gaussian_matrix, kl_upper_bound, lyapunov_e, lyapunov_f, LyapunovState};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diagonal of a matrix that must be diagonal up to `1e-12` relative.
pub(crate) fn diagonal_of(m: &DMatrix<f64>, what: &str) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NonCommuting(format!("{what} is not square")));
    }
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)].abs() > 1e-12 * scale {
                return Err(Error::NonCommuting(format!("{what} is not diagonal")));
            }
        }
    }
    Ok(m.diagonal().iter().copied().collect())
}

pub(crate) fn check_positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive and finite, got {v}")))
    }
}

/// `T < lambda` for every eigenvalue.
pub(crate) fn check_regularization(t: f64, lambda_min: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("T must be nonnegative, got {t}")));
    }
    if t >= lambda_min {
        return Err(Error::RegularizationTooLarge { t, lambda_min });
    }
    Ok(())
}
