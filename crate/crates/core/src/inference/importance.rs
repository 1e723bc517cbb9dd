use rayon::prelude::*;

use super::model::GenerativeModel;
use super::rejection::PROPOSAL_BATCH;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Proposal law `g` for θ.
pub trait Proposal<T>: Sync {
    fn sample(&self, rng: &mut Stream) -> T;
    fn log_density(&self, theta: &T) -> f64;
}

/// Uses the model prior as the proposal, so the weights reduce to the
/// mechanism densities.
pub struct PriorProposal<'a, M: GenerativeModel> {
    pub model: &'a M,
    pub z: &'a M::Public,
}

impl<M: GenerativeModel> Proposal<M::Theta> for PriorProposal<'_, M> {
    fn sample(&self, rng: &mut Stream) -> M::Theta {
        self.model.sample_prior(self.z, rng)
    }

    fn log_density(&self, theta: &M::Theta) -> f64 {
        self.model.prior_log_density(theta, self.z)
    }
}

#[derive(Debug, Clone)]
pub struct WeightedPosterior<T> {
    pub draws: Vec<T>,
    /// Normalized weights.
    pub weights: Vec<f64>,
    /// `1 / Σ w̄²`.
    pub ess: f64,
}

#[derive(Debug, Clone)]
pub struct ImportanceEstimate<T> {
    /// Self-normalized estimate of `E[a(θ) | Y, Z]`.
    pub estimate: f64,
    /// Delta-method standard error `sqrt(Σ w̄² (a(θ) − estimate)²)`.
    pub standard_error: f64,
    pub posterior: WeightedPosterior<T>,
}

/// Self-normalized importance estimate of `E[a(θ) | Y = y, Z = z]` from `m`
/// proposals `θ ~ g` with weights `π(y | X, z) π(θ | z) / g(θ)`.
pub fn importance_posterior<M, G, A>(
    model: &M,
    y: &M::Output,
    z: &M::Public,
    m: usize,
    proposal: &G,
    functional: A,
    seed: u64,
) -> Result<ImportanceEstimate<M::Theta>>
where
    M: GenerativeModel,
    G: Proposal<M::Theta>,
    A: Fn(&M::Theta) -> f64,
{
    if m == 0 {
        return Err(Error::InvalidInput("need at least one proposal".into()));
    }
    let batches = (m as u64).div_ceil(PROPOSAL_BATCH);
    let parts: Vec<Vec<(M::Theta, f64)>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = PROPOSAL_BATCH.min(m as u64 - b * PROPOSAL_BATCH);
            let mut rng = rng::stream(seed, b);
            (0..size)
                .map(|_| {
                    let theta = proposal.sample(&mut rng);
                    let x = model.sample_data(&theta, z, &mut rng);
                    let log_w = model.mechanism_log_density(y, &x, z) + model.prior_log_density(&theta, z)
                        - proposal.log_density(&theta);
                    (theta, if log_w.is_nan() { f64::NEG_INFINITY } else { log_w })
                })
                .collect()
        })
        .collect();
    let (draws, log_w): (Vec<M::Theta>, Vec<f64>) = parts.into_iter().flatten().unzip();

    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights(format!(
            "all {m} importance weights are zero; the proposal may miss the posterior support"
        )));
    }
    if max == f64::INFINITY {
        return Err(Error::DegenerateWeights(
            "infinite importance weight; the proposal does not dominate the prior".into(),
        ));
    }
    // Relative weights are exactly one at equal log weights, so equal
    // weights give an ESS of exactly m.
    let relative: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = relative.iter().sum();
    let ess = sum * sum / relative.iter().map(|w| w * w).sum::<f64>();
    let weights: Vec<f64> = relative.iter().map(|w| w / sum).collect();

    // Ratio of sums in the same order, so a constant functional is
    // reproduced exactly.
    let values: Vec<f64> = draws.iter().map(&functional).collect();
    let estimate = relative.iter().zip(&values).map(|(w, a)| w * a).sum::<f64>() / sum;
    let variance: f64 = weights
        .iter()
        .zip(&values)
        .map(|(w, a)| w * w * (a - estimate) * (a - estimate))
        .sum();
    Ok(ImportanceEstimate {
        estimate,
        standard_error: variance.sqrt(),
        posterior: WeightedPosterior { draws, weights, ess },
    })
}
