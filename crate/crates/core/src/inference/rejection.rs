use rand::Rng;
use rayon::prelude::*;

use super::model::GenerativeModel;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_PROPOSALS_PER_DRAW: u64 = 1_000_000;
/// Proposals per seeded batch.
pub const PROPOSAL_BATCH: u64 = 4096;
const BATCHES_PER_ROUND: u64 = 64;
/// Slack for mechanism densities that exceed the declared supremum by
/// rounding only.
const SUP_SLACK: f64 = 1e-9;

/// Accepted `(offset within batch, θ)` pairs of one batch.
type BatchResult<T> = Result<Vec<(u64, T)>>;

#[derive(Debug, Clone)]
pub struct RejectionPosterior<T> {
    pub draws: Vec<T>,
    /// Proposals consumed up to the last returned acceptance.
    pub proposals: u64,
    pub acceptance_rate: f64,
}

/// Exact posterior draws of `θ | Y = y, Z = z`.
///
/// Each proposal draws `θ* ~ π(θ | z)` and `X* ~ π(· | θ*, z)` and is kept
/// when `U ≤ π(y | X*, z) / sup_y' π(y' | X*, z)`. Batch `b` uses stream `b`
/// of `seed` and batches are merged in index order, so the output does not
/// depend on the thread count.
pub fn rejection_posterior<M: GenerativeModel>(
    model: &M,
    y: &M::Output,
    z: &M::Public,
    n_draws: usize,
    max_proposals: u64,
    seed: u64,
) -> Result<RejectionPosterior<M::Theta>> {
    if n_draws == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    if max_proposals == 0 {
        return Err(Error::InvalidInput("proposal budget must be positive".into()));
    }
    let total_batches = max_proposals.div_ceil(PROPOSAL_BATCH);
    let mut draws: Vec<M::Theta> = Vec::with_capacity(n_draws);
    let mut proposals = 0u64;
    let mut next_batch = 0u64;
    while next_batch < total_batches {
        let round_end = (next_batch + BATCHES_PER_ROUND).min(total_batches);
        let results: Vec<BatchResult<M::Theta>> = (next_batch..round_end)
            .into_par_iter()
            .map(|b| {
                let size = PROPOSAL_BATCH.min(max_proposals - b * PROPOSAL_BATCH);
                run_batch(model, y, z, b, size, seed)
            })
            .collect();
        for (b, batch) in (next_batch..round_end).zip(results) {
            let size = PROPOSAL_BATCH.min(max_proposals - b * PROPOSAL_BATCH);
            for (offset, theta) in batch? {
                draws.push(theta);
                if draws.len() == n_draws {
                    let proposals = b * PROPOSAL_BATCH + offset + 1;
                    return Ok(RejectionPosterior {
                        draws,
                        proposals,
                        acceptance_rate: n_draws as f64 / proposals as f64,
                    });
                }
            }
            proposals += size;
        }
        next_batch = round_end;
    }
    Err(Error::BudgetExhausted {
        requested: n_draws,
        accepted: draws.len(),
        proposals,
        acceptance_rate: draws.len() as f64 / proposals as f64,
    })
}

fn run_batch<M: GenerativeModel>(
    model: &M,
    y: &M::Output,
    z: &M::Public,
    batch: u64,
    size: u64,
    seed: u64,
) -> BatchResult<M::Theta> {
    let mut rng = rng::stream(seed, batch);
    let mut accepted = Vec::new();
    for offset in 0..size {
        let theta = model.sample_prior(z, &mut rng);
        let x = model.sample_data(&theta, z, &mut rng);
        let sup = model.mechanism_log_density_sup(&x, z);
        let log_density = model.mechanism_log_density(y, &x, z);
        if !sup.is_finite() {
            return Err(Error::Validation(format!(
                "mechanism density supremum {sup} is not finite"
            )));
        }
        if log_density > sup + SUP_SLACK {
            return Err(Error::Validation(format!(
                "mechanism log density {log_density} exceeds its supremum {sup}"
            )));
        }
        let log_ratio = (log_density - sup).min(0.0);
        // U is uniform on [0, 1), so a zero ratio never accepts.
        let u: f64 = rng.random();
        if u < log_ratio.exp() {
            accepted.push((offset, theta));
        }
    }
    Ok(accepted)
}
