use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this condition number `Σ_VZ` is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Jointly Gaussian sample mean, first record and public value.
///
/// `sigma_xvz` is the cross-covariance of the mean with `(X_1, Z)`,
/// `sigma_vz` the covariance of `(X_1, Z)`, `delta` the bound on how far
/// apart the two secret values of `X_1` may be.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCondFamily {
    pub sigma_xvz: [f64; 2],
    pub sigma_vz: [[f64; 2]; 2],
    pub delta: f64,
    pub mu_z: f64,
    pub z: f64,
}

impl GaussianCondFamily {
    /// The family where `Z` is independent of the records: the mean has
    /// covariance `σ²/n` with `X_1`, and `Var(X_1) = σ²`.
    pub fn independent_public(sigma: f64, n: f64, sigma_z: f64, delta: f64, z: f64) -> Self {
        let s2 = sigma * sigma;
        Self {
            sigma_xvz: [s2 / n, 0.0],
            sigma_vz: [[s2, 0.0], [0.0, sigma_z * sigma_z]],
            delta,
            mu_z: 0.0,
            z,
        }
    }

    fn eigenvalues(&self) -> (f64, f64) {
        let [[a, b], [_, d]] = self.sigma_vz;
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - radius, mean + radius)
    }

    pub fn validate(&self) -> Result<()> {
        let values = self
            .sigma_xvz
            .iter()
            .chain(self.sigma_vz.iter().flatten())
            .chain([&self.delta, &self.mu_z, &self.z]);
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("Gaussian family has non-finite entries".into()));
        }
        if self.sigma_vz[0][1] != self.sigma_vz[1][0] {
            return Err(Error::Validation("Σ_VZ is not symmetric".into()));
        }
        if self.delta < 0.0 {
            return Err(Error::Validation(format!("record bound {} is negative", self.delta)));
        }
        Ok(())
    }
}

/// Public-information sensitivity of the sample mean: the conditional laws
/// given the two secret values form a location family, and W∞ is the shift
/// between their means, `Σ_XVZᵀ Σ_VZ⁻¹ (Δ, z − μ_Z)ᵀ`, in absolute value.
pub fn delta_z_gaussian(family: &GaussianCondFamily) -> Result<f64> {
    family.validate()?;
    let (lo, hi) = family.eigenvalues();
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(lo > 0.0) || condition > MAX_CONDITION {
        return Err(Error::Numerical {
            message: format!("Σ_VZ is singular or not positive definite (eigenvalues {lo:.3e}, {hi:.3e})"),
            condition_number: condition,
        });
    }
    let [[a, b], [_, d]] = family.sigma_vz;
    let det = a * d - b * b;
    let rhs = [family.delta, family.z - family.mu_z];
    let solved = [(d * rhs[0] - b * rhs[1]) / det, (a * rhs[1] - b * rhs[0]) / det];
    let shift = family.sigma_xvz[0] * solved[0] + family.sigma_xvz[1] * solved[1];
    Ok(shift.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_public_reduces_to_delta_over_n() {
        for (sigma, n, delta) in [(1.0, 10.0, 2.0), (3.5, 250.0, 7.0), (0.2, 2.0, 1.0)] {
            let f = GaussianCondFamily::independent_public(sigma, n, 4.0, delta, 1.7);
            let got = delta_z_gaussian(&f).unwrap();
            assert!((got - delta / n).abs() < 1e-12, "{got} vs {}", delta / n);
        }
    }

    #[test]
    fn zero_displacement() {
        let f = GaussianCondFamily {
            sigma_xvz: [0.3, 0.4],
            sigma_vz: [[2.0, 0.5], [0.5, 1.0]],
            delta: 0.0,
            mu_z: 1.5,
            z: 1.5,
        };
        assert_eq!(delta_z_gaussian(&f).unwrap(), 0.0);
    }

    #[test]
    fn identity_covariance() {
        let f = GaussianCondFamily {
            sigma_xvz: [1.0, 1.0],
            sigma_vz: [[1.0, 0.0], [0.0, 1.0]],
            delta: 2.0,
            mu_z: 0.0,
            z: 3.0,
        };
        assert!((delta_z_gaussian(&f).unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn singular_reports_condition() {
        let f = GaussianCondFamily {
            sigma_xvz: [1.0, 1.0],
            sigma_vz: [[1.0, 1.0], [1.0, 1.0]],
            delta: 2.0,
            mu_z: 0.0,
            z: 3.0,
        };
        match delta_z_gaussian(&f) {
            Err(Error::Numerical { condition_number, .. }) => assert!(condition_number > 1e12),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let f = GaussianCondFamily {
            sigma_xvz: [1.0, 1.0],
            sigma_vz: [[1.0, 0.2], [0.1, 1.0]],
            delta: 2.0,
            mu_z: 0.0,
            z: 3.0,
        };
        assert!(matches!(delta_z_gaussian(&f), Err(Error::Validation(_))));
    }
}
