//! Wasserstein-∞ distances and the public-information sensitivity Δ_z.

mod count;
mod gaussian;
pub mod oracle;
mod pmf;

pub use count::{
    delta_z_count, filter_secret_pairs_sdl, CountBoundFamily, DeltaZ, SdlConstraints,
    DEFAULT_GRID_STEPS,
};
pub use gaussian::{delta_z_gaussian, GaussianCondFamily};
pub use oracle::w_inf_oracle;
pub use pmf::{w_inf_1d, DiscretePmf, MASS_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the loss whose variation bounds the exponential mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// `L_x(y) = ‖y − T(x)‖` with dataset metric `‖T(x) − T(x')‖`.
    NormOfDifference,
    /// `½‖y − T(x)‖²`; variation depends on the output range.
    SquaredNorm,
}

/// `σ(Δ_z)`: the largest change in the loss between datasets within Δ_z.
///
/// For norm-of-difference losses the reverse triangle inequality makes this
/// exactly Δ_z. Other losses have no closed form here and the caller must
/// supply its own bound.
pub fn sigma_of_delta(loss: LossKind, delta_z: f64) -> Result<f64> {
    if !(delta_z >= 0.0) || !delta_z.is_finite() {
        return Err(Error::InvalidInput(format!("Δ_z = {delta_z} must be finite and >= 0")));
    }
    match loss {
        LossKind::NormOfDifference => Ok(delta_z),
        LossKind::SquaredNorm => Err(Error::Unsupported(
            "no closed-form loss variation for squared-norm losses; supply a custom bound".into(),
        )),
    }
}
