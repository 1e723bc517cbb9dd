use rand::Rng;

use crate::error::{Error, Result};

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "discrete Laplace scale must be positive, got {scale}"
        )));
    }
    Ok(())
}

/// `ln p(k)` for `p(k) = tanh(s/2) e^{-s|k|}`, the normalized form of
/// `(e^s − 1)/(e^s + 1) e^{-s|k|}`.
pub(crate) fn log_pmf_unchecked(k: i64, scale: f64) -> f64 {
    if scale.is_infinite() {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    (0.5 * scale).tanh().ln() - scale * k.unsigned_abs() as f64
}

pub fn discrete_laplace_log_pmf(k: i64, scale: f64) -> Result<f64> {
    check_scale(scale)?;
    Ok(log_pmf_unchecked(k, scale))
}

/// Two-sided geometric mass `p(k) ∝ exp(−scale·|k|)`.
pub fn discrete_laplace_pmf(k: i64, scale: f64) -> Result<f64> {
    discrete_laplace_log_pmf(k, scale).map(f64::exp)
}

/// Inverse-CDF draw: zero with probability `p(0)`, otherwise a fair sign
/// times `1 + Geometric(1 − e^{−scale})`.
pub fn sample_discrete_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<i64> {
    check_scale(scale)?;
    Ok(sample_unchecked(scale, rng))
}

pub(crate) fn sample_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> i64 {
    if scale.is_infinite() {
        return 0;
    }
    let p_zero = (0.5 * scale).tanh();
    let u: f64 = rng.random();
    if u < p_zero {
        return 0;
    }
    // 1 - U lies in (0, 1], so the logarithm is finite.
    let v: f64 = 1.0 - rng.random::<f64>();
    let magnitude = 1 + (-v.ln() / scale).floor() as i64;
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}
