use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use super::exponential::{BaseMeasure, Loss, MechanismSpec, Norm, Release, ReleaseValues};
use crate::error::{Error, Result};

/// Draws `u ∈ ℝ^d` with density `∝ exp(−‖u‖_K / scale)`.
///
/// The K-norm of such a draw is `Gamma(d, scale)`. Its direction follows the
/// cone measure of the unit ball, which is the law of `v/‖v‖_K` for any `v`
/// whose density depends on `v` only through `‖v‖_K`.
pub fn sample_knorm_noise<R: Rng + ?Sized>(dim: usize, norm: Norm, scale: f64, rng: &mut R) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::InvalidInput("noise dimension must be positive".into()));
    }
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::InvalidInput(format!("noise scale {scale} must be finite and nonnegative")));
    }
    if scale == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    let direction: Vec<f64> = loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| match norm {
                Norm::L1 => {
                    let e: f64 = Exp1.sample(rng);
                    if rng.random::<bool>() {
                        e
                    } else {
                        -e
                    }
                }
                Norm::L2 => StandardNormal.sample(rng),
                Norm::LInf => rng.random_range(-1.0..1.0),
            })
            .collect();
        let length = norm.of(v.iter().copied());
        if length > 0.0 {
            break v.into_iter().map(|x| x / length).collect();
        }
    };
    let radius = Gamma::new(dim as f64, scale)
        .map_err(|e| Error::InvalidInput(format!("radius law: {e}")))?
        .sample(rng);
    Ok(direction.into_iter().map(|x| radius * x).collect())
}

fn check(spec: &MechanismSpec, statistic: &[f64]) -> Result<()> {
    spec.validate()?;
    if spec.loss != Loss::Quadratic {
        return Err(Error::Unsupported(
            "the gradient mechanism needs the differentiable quadratic loss".into(),
        ));
    }
    if spec.base_measure != BaseMeasure::Naive {
        return Err(Error::Unsupported(
            "the gradient mechanism is implemented for the ambient Lebesgue base measure".into(),
        ));
    }
    if statistic.is_empty() || statistic.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("statistic must be a nonempty finite vector".into()));
    }
    Ok(())
}

/// Releases `Y` with density `∝ exp(−ε ‖∇L(Y)‖_K / (2σ_y))`. Under the
/// quadratic loss `∇L(y) = y − T(x)`, so `Y = T(x) + U` with K-norm noise of
/// scale `2σ_y/ε`.
pub fn knorm_gradient_mech<R: Rng + ?Sized>(
    spec: &MechanismSpec,
    statistic: &[f64],
    k_norm: Norm,
    rng: &mut R,
) -> Result<Release> {
    check(spec, statistic)?;
    let noise = sample_knorm_noise(statistic.len(), k_norm, 1.0 / spec.rate(), rng)?;
    Ok(Release {
        values: ReleaseValues::Real(statistic.iter().zip(noise).map(|(t, u)| t + u).collect()),
        spec: spec.clone(),
        chain_diagnostics: None,
    })
}

/// Unnormalized log density of the gradient mechanism at `y` with a
/// sensitivity bound that may depend on `y`.
///
/// With a non-constant `sigma_y` the normalizer varies with the data only
/// through the gradient, but calibrating such bounds is left to the caller;
/// [`knorm_gradient_mech`] samples the constant-bound case.
pub fn knorm_log_density_with<F>(
    epsilon: f64,
    sigma_y: F,
    statistic: &[f64],
    y: &[f64],
    k_norm: Norm,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if !(epsilon > 0.0) {
        return Err(Error::InvalidBudget(format!("epsilon {epsilon} must be positive")));
    }
    if y.len() != statistic.len() {
        return Err(Error::InvalidInput(format!(
            "output has {} coordinates, statistic {}",
            y.len(),
            statistic.len()
        )));
    }
    let sigma = sigma_y(y);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("sensitivity {sigma} at y must be positive")));
    }
    let gradient = y.iter().zip(statistic).map(|(a, b)| a - b);
    Ok(-epsilon * k_norm.of(gradient) / (2.0 * sigma))
}

pub fn knorm_log_density(spec: &MechanismSpec, statistic: &[f64], y: &[f64], k_norm: Norm) -> Result<f64> {
    check(spec, statistic)?;
    knorm_log_density_with(spec.epsilon, |_| spec.sensitivity, statistic, y, k_norm)
}
