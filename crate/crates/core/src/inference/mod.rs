//! Posterior inference from a privatized release and public information.
//!
//! Models implement [`GenerativeModel`]; the samplers only ever evaluate the
//! mechanism density and its supremum, so the confidential data is never
//! needed.

mod desk;
mod importance;
mod model;
mod oracle;
mod rejection;

use std::io::Write;

pub use desk::{BetaBinomialDesk, GridProposal};
pub use importance::{importance_posterior, ImportanceEstimate, PriorProposal, Proposal, WeightedPosterior};
pub use model::{FiniteModel, GenerativeModel};
pub use oracle::{exhaustive_posterior_oracle, GridPosterior, MAX_ORACLE_CELLS};
pub use rejection::{
    rejection_posterior, RejectionPosterior, DEFAULT_PROPOSALS_PER_DRAW, PROPOSAL_BATCH,
};

use crate::error::Result;

/// Writes `draw,theta,weight` rows; unweighted draws get weight `1/len`.
pub fn write_posterior_csv<W: Write>(writer: W, thetas: &[f64], weights: Option<&[f64]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["draw", "theta", "weight"])?;
    let uniform = 1.0 / thetas.len().max(1) as f64;
    for (i, theta) in thetas.iter().enumerate() {
        let w = weights.map_or(uniform, |w| w[i]);
        out.write_record([i.to_string(), theta.to_string(), w.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
