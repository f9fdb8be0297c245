use nalgebra::{Complex, Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use super::{check_positive, check_regularization};
use crate::error::{Error, Result};

/// `h(lambda) = lambda^{-1} (lambda - T) / (lambda + T)`.
///
/// The linearized dynamics in direction `lambda` have characteristic polynomial
/// `chi^2 + a chi + 2 h(lambda)`.
pub fn h_ratio(lambda: f64, t: f64) -> f64 {
    (lambda - t) / (lambda * (lambda + t))
}

/// Damping that makes the linearized discriminant vanish in direction `lambda`.
pub fn critical_damping(lambda: f64, t: f64) -> f64 {
    (8.0 * h_ratio(lambda, t)).sqrt()
}

/// Treats a discriminant within rounding of zero as exactly zero.
fn snap_discriminant(disc: f64, a: f64, b: f64) -> f64 {
    let tol = 16.0 * f64::EPSILON * a.abs().max(b.abs());
    if disc.abs() <= tol {
        0.0
    } else {
        disc
    }
}

fn complex_sqrt(disc: f64) -> Complex<f64> {
    if disc >= 0.0 {
        Complex::new(disc.sqrt(), 0.0)
    } else {
        Complex::new(0.0, (-disc).sqrt())
    }
}

/// Asymptotic rate of the linearized continuous dynamics over `[lambda_min, lambda_max]`:
/// `r = (a - sqrt(max(a^2 - 8 h(lambda), 0))) / 2` at the slowest direction.
pub fn linearized_rate_cts(lambda_min: f64, lambda_max: f64, t: f64, a: f64) -> Result<f64> {
    check_positive(lambda_min, "lambda_min")?;
    check_positive(a, "a")?;
    if lambda_max < lambda_min {
        return Err(Error::domain("lambda_max must be at least lambda_min"));
    }
    check_regularization(t, lambda_min)?;
    let mut candidates = vec![lambda_min, lambda_max];
    let crit = (1.0 + std::f64::consts::SQRT_2) * t;
    if crit > lambda_min && crit < lambda_max {
        candidates.push(crit);
    }
    let worst = candidates
        .into_iter()
        .map(|l| {
            let b = 8.0 * h_ratio(l, t);
            snap_discriminant(a * a - b, a * a, b)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (a - worst.max(0.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimalMode {
    /// Critical damping in the stiffest direction `lambda_max`.
    MaxCritical,
    /// Critical damping in the softest direction `lambda_min`, step `2/a`.
    MinCritical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalParams {
    pub a: f64,
    pub eta: f64,
    pub rate: f64,
}

/// Both modes reach the mixing rate `sqrt(1 - h_lo / h_hi)`.
fn optimal_from_ratios(h_lo: f64, h_hi: f64, mode: OptimalMode) -> OptimalParams {
    let s2 = std::f64::consts::SQRT_2;
    let rate = (1.0 - h_lo / h_hi).max(0.0).sqrt();
    match mode {
        OptimalMode::MaxCritical => OptimalParams {
            a: 2.0 * s2 * h_lo.sqrt(),
            eta: h_lo.sqrt() / (s2 * h_hi),
            rate,
        },
        OptimalMode::MinCritical => {
            let a = 2.0 * s2 * h_hi.sqrt();
            OptimalParams { a, eta: 2.0 / a, rate }
        }
    }
}

/// Optimal damping, step and mixing rate of the linearized discrete system.
///
/// Requires `0 <= T <= lambda_min / (1 + sqrt 2)`, where `h` is monotone on the
/// spectrum. Use [`optimal_params_for_spectrum`] for larger `T`.
pub fn optimal_params(lambda_min: f64, lambda_max: f64, t: f64, mode: OptimalMode) -> Result<OptimalParams> {
    check_positive(lambda_min, "lambda_min")?;
    if lambda_max < lambda_min {
        return Err(Error::domain("lambda_max must be at least lambda_min"));
    }
    let bound = lambda_min / (1.0 + std::f64::consts::SQRT_2);
    if !(t >= 0.0 && t <= bound * (1.0 + 1e-12)) {
        return Err(Error::domain(format!(
            "optimal parameters need 0 <= T <= lambda_min/(1+sqrt 2) = {bound}, got T = {t}"
        )));
    }
    Ok(optimal_from_ratios(
        h_ratio(lambda_max, t),
        h_ratio(lambda_min, t),
        mode,
    ))
}

/// Relaxed form of [`optimal_params`] for any `0 <= T < lambda_min`, using the
/// extremes of `h` over the given eigenvalues.
pub fn optimal_params_for_spectrum(eigenvalues: &[f64], t: f64, mode: OptimalMode) -> Result<OptimalParams> {
    if eigenvalues.is_empty() {
        return Err(Error::domain("spectrum is empty"));
    }
    for &l in eigenvalues {
        check_positive(l, "eigenvalue")?;
    }
    let lmin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    check_regularization(t, lmin)?;
    let hs: Vec<f64> = eigenvalues.iter().map(|&l| h_ratio(l, t)).collect();
    let h_lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let h_hi = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(optimal_from_ratios(h_lo, h_hi, mode))
}

/// Rate `sqrt(1 - 1/kappa)` of optimally tuned kinetic Langevin on a Gaussian.
pub fn kinetic_langevin_rate(kappa: f64) -> Result<f64> {
    if !(kappa >= 1.0) {
        return Err(Error::domain(format!(
            "condition number must be at least 1, got {kappa}"
        )));
    }
    Ok((1.0 - 1.0 / kappa).sqrt())
}

/// Linearization of the continuous covariance flow around its fixed point.
///
/// State `(sigma_tilde - lambda, g)`; `a_matrix = [[0, 2 lambda - 4T/k_+], [-lambda^{-2}, -a]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedSystem {
    pub a_matrix: Matrix2<f64>,
    pub eigs: [Complex<f64>; 2],
    pub eta: f64,
    /// Eigenvalues of `I + eta A`.
    pub update_eigs: [Complex<f64>; 2],
    pub spectral_radius: f64,
}

impl LinearizedSystem {
    pub fn update_matrix(&self) -> Matrix2<f64> {
        Matrix2::identity() + self.a_matrix * self.eta
    }
}

pub fn linearized_update_matrix(lambda: f64, t: f64, a: f64, eta: f64) -> Result<LinearizedSystem> {
    check_positive(lambda, "lambda")?;
    check_regularization(t, lambda)?;
    if !(a >= 0.0 && eta >= 0.0) {
        return Err(Error::domain("a and eta must be nonnegative"));
    }
    let kp = 1.0 + t / lambda;
    let b = 2.0 * lambda - 4.0 * t / kp;
    let a_matrix = Matrix2::new(0.0, b, -1.0 / (lambda * lambda), -a);
    let c = 4.0 * b / (lambda * lambda);
    let disc = snap_discriminant(a * a - c, a * a, c);
    let root = complex_sqrt(disc);
    let half = Complex::new(-0.5 * a, 0.0);
    let eigs = [half + root * 0.5, half - root * 0.5];
    let one = Complex::new(1.0, 0.0);
    let update_eigs = [one + eigs[0] * eta, one + eigs[1] * eta];
    let spectral_radius = update_eigs[0].norm().max(update_eigs[1].norm());
    Ok(LinearizedSystem {
        a_matrix,
        eigs,
        eta,
        update_eigs,
        spectral_radius,
    })
}

/// Moment dynamics `d/dt (Sxx, Sxp, Spp)` of kinetic Langevin on `N(0, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlmcMoments {
    pub matrix: Matrix3<f64>,
    pub eigs: [Complex<f64>; 3],
}

/// Linear part of the covariance ODE of `dx = p dt`, `dp = -a p dt - x/lambda dt + sqrt(2a) dW`:
/// `[[0, 2, 0], [-1/lambda, -a, 1], [0, -2/lambda, -2a]]`, with eigenvalues
/// `-a` and `-a +- sqrt(a^2 - 4/lambda)`.
pub fn klmc_cov_matrix(lambda: f64, a: f64) -> Result<KlmcMoments> {
    check_positive(lambda, "lambda")?;
    check_positive(a, "a")?;
    let li = 1.0 / lambda;
    let matrix = Matrix3::new(0.0, 2.0, 0.0, -li, -a, 1.0, 0.0, -2.0 * li, -2.0 * a);
    let disc = snap_discriminant(a * a - 4.0 * li, a * a, 4.0 * li);
    let root = complex_sqrt(disc);
    let m = Complex::new(-a, 0.0);
    Ok(KlmcMoments {
        matrix,
        eigs: [m, m + root, m - root],
    })
}
