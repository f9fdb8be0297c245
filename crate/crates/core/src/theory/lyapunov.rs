use nalgebra::DMatrix;

use super::check_positive;
use super::closure::spd_eigenvalues;
use crate::error::{Error, Result};

/// Lyapunov functionals of the continuous covariance flow at one state.
///
/// `e_value` is
/// `(sigma_tilde - 2T/k_+) (b_- + g)^2 + sigma_tilde/lambda - log(sigma_tilde/lambda) - 1`
/// and `f_value` is its damped variant
/// `zeta^{-1} (sigma_tilde - 2T/k_+) (b_- + zeta g)^2 + zeta (sigma_tilde/lambda - log(sigma_tilde/lambda) - 1)`
/// with `zeta = a sqrt(lambda) / 2`. At critical damping `zeta = 1` and both agree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovState {
    /// `lambda^{-1/2} + sigma_tilde^{-1/2}`.
    pub b_plus: f64,
    /// `lambda^{-1/2} - sigma_tilde^{-1/2}`.
    pub b_minus: f64,
    pub zeta: f64,
    /// `a zeta - lambda^{-1/2} + 2T k_+^{-1} sigma_tilde^{-3/2}`.
    pub p: f64,
    pub e_value: f64,
    pub f_value: f64,
    /// Smallest positive root `r` of the rate quadratic.
    pub rate: f64,
    /// Certified exponent: `d/dt f <= -decay f`, equal to `2 r b_+ c / zeta`.
    pub decay: f64,
    /// Critical-damping exponent `lambda^{-1/2} (1 - 2T k_+^{-1} / sigma_tilde)` for `e_value`.
    pub critical_decay: f64,
}

fn two_kl(sigma_tilde: f64, lambda: f64) -> f64 {
    let r = sigma_tilde / lambda;
    r - r.ln() - 1.0
}

/// Smallest positive root of
/// `Q(r) = zeta^{-2} p^2 - 4 (1 - r) b_+ (p - r b_+ c)`.
///
/// A discriminant that is negative through rounding is clamped to zero, which
/// returns the double root. Returns 0 when no positive root exists.
fn rate_root(zeta: f64, p: f64, b_plus: f64, c: f64) -> f64 {
    let a2 = -4.0 * b_plus * b_plus * c;
    let a1 = 4.0 * b_plus * (p + b_plus * c);
    let a0 = p * p / (zeta * zeta) - 4.0 * b_plus * p;
    let roots: Vec<f64> = if a2 == 0.0 {
        vec![-a0 / a1]
    } else {
        let sq = (a1 * a1 - 4.0 * a2 * a0).max(0.0).sqrt();
        let q = -0.5 * (a1 + a1.signum() * sq);
        if q == 0.0 {
            vec![-a1 / (2.0 * a2)]
        } else {
            vec![q / a2, a0 / q]
        }
    };
    let r = roots
        .into_iter()
        .filter(|r| *r > 0.0 && r.is_finite())
        .fold(f64::INFINITY, f64::min);
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

fn evaluate(sigma_tilde: f64, g: f64, lambda: f64, t: f64, a: f64) -> Result<LyapunovState> {
    check_positive(sigma_tilde, "sigma_tilde")?;
    check_positive(lambda, "lambda")?;
    if !(t >= 0.0) {
        return Err(Error::domain(format!("T must be nonnegative, got {t}")));
    }
    let kp = 1.0 + t / lambda;
    let floor = 2.0 * t / kp;
    let weight = sigma_tilde - floor;
    if !(weight > 0.0) {
        return Err(Error::domain(format!(
            "sigma_tilde = {sigma_tilde} must exceed 2T/k_+ = {floor}"
        )));
    }
    let il = lambda.sqrt().recip();
    let is = sigma_tilde.sqrt().recip();
    let b_plus = il + is;
    let b_minus = il - is;
    let zeta = 0.5 * a * lambda.sqrt();
    let kl2 = two_kl(sigma_tilde, lambda);
    let e_value = weight * (b_minus + g).powi(2) + kl2;
    let f_value = weight * (b_minus + zeta * g).powi(2) / zeta + zeta * kl2;
    let p = a * zeta - il + floor * is * is * is;
    let c = weight / ((2.0 * lambda.sqrt() * b_plus - 1.0) * sigma_tilde);
    let rate = rate_root(zeta, p, b_plus, c);
    Ok(LyapunovState {
        b_plus,
        b_minus,
        zeta,
        p,
        e_value,
        f_value,
        rate,
        decay: 2.0 * rate * b_plus * c / zeta,
        critical_decay: il * (1.0 - floor / sigma_tilde),
    })
}

/// Critically damped Lyapunov function, evaluated at `a = 2 lambda^{-1/2}`.
pub fn lyapunov_e(sigma_tilde: f64, g: f64, lambda: f64, t: f64) -> Result<LyapunovState> {
    check_positive(lambda, "lambda")?;
    evaluate(sigma_tilde, g, lambda, t, 2.0 / lambda.sqrt())
}

/// Overdamped Lyapunov function; needs `a >= 2 lambda^{-1/2}`.
pub fn lyapunov_f(sigma_tilde: f64, g: f64, lambda: f64, t: f64, a: f64) -> Result<LyapunovState> {
    check_positive(lambda, "lambda")?;
    let threshold = 2.0 / lambda.sqrt();
    if !(a >= threshold * (1.0 - 1e-12)) {
        return Err(Error::domain(format!(
            "overdamped regime needs a >= 2 lambda^(-1/2) = {threshold}, got a = {a}"
        )));
    }
    evaluate(sigma_tilde, g, lambda, t, a)
}

/// `KL(N(0, s1) || N(0, s2)) = (s1/s2 - log(s1/s2) - 1) / 2`.
pub fn kl_gaussian(s1: f64, s2: f64) -> Result<f64> {
    check_positive(s1, "variance")?;
    check_positive(s2, "variance")?;
    Ok(0.5 * two_kl(s1, s2))
}

/// `KL(N(0, S1) || N(0, S2)) = (log det S2 - log det S1 - d + tr(S2^{-1} S1)) / 2`.
pub fn kl_gaussian_matrix(s1: &DMatrix<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    if s1.shape() != s2.shape() {
        return Err(Error::DimensionMismatch {
            expected: s2.nrows(),
            got: s1.nrows(),
        });
    }
    spd_eigenvalues(s1, "first covariance")?;
    spd_eigenvalues(s2, "second covariance")?;
    let c1 = s1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("first covariance".into()))?;
    let c2 = s2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("second covariance".into()))?;
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().map(f64::ln).sum();
    let tr = c2.solve(s1).trace();
    Ok(0.5 * (logdet(&c2) - logdet(&c1) - s1.nrows() as f64 + tr))
}

/// Upper bound `sigma_tilde sqrt(lambda) b_-^2 b_+ - sigma_tilde b_-^2 / 2` on
/// [`kl_gaussian`]`(sigma_tilde, lambda)`.
pub fn kl_upper_bound(sigma_tilde: f64, lambda: f64) -> Result<f64> {
    check_positive(sigma_tilde, "sigma_tilde")?;
    check_positive(lambda, "lambda")?;
    let il = lambda.sqrt().recip();
    let is = sigma_tilde.sqrt().recip();
    let bm2 = (il - is).powi(2);
    Ok(sigma_tilde * lambda.sqrt() * bm2 * (il + is) - 0.5 * sigma_tilde * bm2)
}
