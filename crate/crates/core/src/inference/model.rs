use crate::rng::Stream;

/// Prior, data model and release mechanism, all conditioned on public
/// information of type `Public`.
pub trait GenerativeModel: Sync {
    type Theta: Clone + Send + Sync;
    type Data: Send;
    type Output: ?Sized + Sync;
    type Public: ?Sized + Sync;

    /// `θ ~ π(θ | Z = z)`.
    fn sample_prior(&self, z: &Self::Public, rng: &mut Stream) -> Self::Theta;

    /// `ln π(θ | Z = z)` up to a constant; needed by importance sampling.
    fn prior_log_density(&self, theta: &Self::Theta, z: &Self::Public) -> f64;

    /// `X ~ π(· | θ, Z = z)`.
    fn sample_data(&self, theta: &Self::Theta, z: &Self::Public, rng: &mut Stream) -> Self::Data;

    /// `ln π(y | x, z)` up to a constant that does not depend on `y` or `x`.
    fn mechanism_log_density(&self, y: &Self::Output, x: &Self::Data, z: &Self::Public) -> f64;

    /// `ln sup_y π(y | x, z)` on the same scale as
    /// [`mechanism_log_density`](Self::mechanism_log_density).
    fn mechanism_log_density_sup(&self, x: &Self::Data, z: &Self::Public) -> f64;
}

/// A model with a finite parameter grid and finite data space, which the
/// exhaustive oracle can enumerate.
pub trait FiniteModel: GenerativeModel {
    fn theta_grid(&self, z: &Self::Public) -> Vec<Self::Theta>;

    /// Number of data values per parameter, used to refuse oversized
    /// enumerations before any work is done.
    fn data_space_size(&self, z: &Self::Public) -> usize;

    /// `(x, π(x | θ, z))` for every `x` with positive mass.
    fn data_support(&self, theta: &Self::Theta, z: &Self::Public) -> Vec<(Self::Data, f64)>;
}
