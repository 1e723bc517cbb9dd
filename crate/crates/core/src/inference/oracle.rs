use super::model::FiniteModel;
use crate::error::{Error, Result};
use crate::stats::log_sum_exp;

pub const MAX_ORACLE_CELLS: usize = 1_000_000;

/// Posterior masses on a finite parameter grid.
#[derive(Debug, Clone)]
pub struct GridPosterior<T> {
    pub thetas: Vec<T>,
    pub mass: Vec<f64>,
}

impl<T> GridPosterior<T> {
    pub fn mean_by<F: Fn(&T) -> f64>(&self, a: F) -> f64 {
        self.thetas.iter().zip(&self.mass).map(|(t, m)| m * a(t)).sum()
    }
}

/// `π(θ | y, z) ∝ Σ_x π(θ | z) π(x | θ, z) π(y | x, z)` by full enumeration.
pub fn exhaustive_posterior_oracle<M: FiniteModel>(
    model: &M,
    y: &M::Output,
    z: &M::Public,
) -> Result<GridPosterior<M::Theta>> {
    let thetas = model.theta_grid(z);
    let cells = thetas.len().saturating_mul(model.data_space_size(z));
    if cells > MAX_ORACLE_CELLS {
        return Err(Error::Refused(format!(
            "enumeration needs {cells} cells, limit is {MAX_ORACLE_CELLS}"
        )));
    }
    if thetas.is_empty() {
        return Err(Error::InvalidInput("parameter grid is empty".into()));
    }
    let log_joint: Vec<f64> = thetas
        .iter()
        .map(|theta| {
            let terms: Vec<f64> = model
                .data_support(theta, z)
                .iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(x, p)| p.ln() + model.mechanism_log_density(y, x, z))
                .collect();
            model.prior_log_density(theta, z) + log_sum_exp(&terms)
        })
        .collect();
    let log_evidence = log_sum_exp(&log_joint);
    if !log_evidence.is_finite() {
        return Err(Error::Infeasible(
            "observed release has zero probability under the model".into(),
        ));
    }
    let mass = log_joint.iter().map(|l| (l - log_evidence).exp()).collect();
    Ok(GridPosterior { thetas, mass })
}
