//! Release mechanisms and the samplers behind them.

pub mod chain;
pub mod dirichlet;
pub mod exponential;
pub mod knorm;
pub mod laplace;

pub use chain::{
    constrained_chain_sample, ChainConstraints, ChainDiagnostics, ChainState, ChainTarget, Move, StepLaw,
};
pub use dirichlet::{dm_log_pmf, DirichletMultinomial};
pub use exponential::{
    exp_mech_log_density, sample_replicates, wasserstein_exp_mech, BaseMeasure, ChainSettings,
    CountStatistic, Loss, MechanismSpec, Norm, Release, ReleaseValues, ZERO_PRIOR_PSEUDO_COUNT,
};
pub use knorm::{knorm_gradient_mech, knorm_log_density, knorm_log_density_with, sample_knorm_noise};
pub use laplace::{discrete_laplace_log_pmf, discrete_laplace_pmf, sample_discrete_laplace};
