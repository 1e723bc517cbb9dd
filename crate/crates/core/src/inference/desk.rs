use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::Binomial;

use super::importance::Proposal;
use super::model::{FiniteModel, GenerativeModel};
use crate::error::{Error, Result};
use crate::mechanisms::laplace::log_pmf_unchecked;
use crate::rng::Stream;
use crate::stats::binomial_pmf;

/// Grid-discretized Beta prior on a success probability, Binomial(n, θ)
/// count, and an additive discrete Laplace release of the count at scale
/// `ε / Δ`. An infinite `ε` releases the count exactly.
#[derive(Debug, Clone)]
pub struct BetaBinomialDesk {
    n: u64,
    grid: Vec<f64>,
    log_prior: Vec<f64>,
    scale: f64,
}

impl BetaBinomialDesk {
    pub fn new(n: u64, grid_points: usize, a: f64, b: f64, epsilon: f64, sensitivity: f64) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {grid_points}")));
        }
        if !(a >= 1.0 && b >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "Beta({a}, {b}) prior must have both shapes at least 1 to be finite on the grid"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!("epsilon {epsilon} must be positive")));
        }
        if !(sensitivity > 0.0) || !sensitivity.is_finite() {
            return Err(Error::InvalidInput(format!("sensitivity {sensitivity} must be positive")));
        }
        let last = (grid_points - 1) as f64;
        let grid: Vec<f64> = (0..grid_points).map(|k| k as f64 / last).collect();
        let unnorm: Vec<f64> = grid
            .iter()
            .map(|&t| pow_or_one(t, a - 1.0) * pow_or_one(1.0 - t, b - 1.0))
            .collect();
        let total: f64 = unnorm.iter().sum();
        let log_prior = unnorm.iter().map(|w| (w / total).ln()).collect();
        Ok(Self {
            n,
            grid,
            log_prior,
            scale: epsilon / sensitivity,
        })
    }

    /// `n = 8`, 21-point uniform prior grid, `ε = 1`, unit sensitivity.
    pub fn desk() -> Self {
        Self::new(8, 21, 1.0, 1.0, 1.0, 1.0).expect("valid desk parameters")
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn prior_mass(&self) -> Vec<f64> {
        self.log_prior.iter().map(|l| l.exp()).collect()
    }

    fn index_of(&self, theta: f64) -> Option<usize> {
        let last = (self.grid.len() - 1) as f64;
        let k = (theta * last).round();
        if !(0.0..=last).contains(&k) || (k / last - theta).abs() > 1e-12 {
            return None;
        }
        Some(k as usize)
    }
}

fn pow_or_one(base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else {
        base.powf(exponent)
    }
}

impl GenerativeModel for BetaBinomialDesk {
    type Theta = f64;
    type Data = u64;
    type Output = i64;
    type Public = ();

    fn sample_prior(&self, _z: &(), rng: &mut Stream) -> f64 {
        let weights = WeightedIndex::new(self.prior_mass()).expect("prior masses are positive");
        self.grid[weights.sample(rng)]
    }

    fn prior_log_density(&self, theta: &f64, _z: &()) -> f64 {
        self.index_of(*theta)
            .map_or(f64::NEG_INFINITY, |k| self.log_prior[k])
    }

    fn sample_data(&self, theta: &f64, _z: &(), rng: &mut Stream) -> u64 {
        Binomial::new(self.n, *theta)
            .expect("grid points lie in [0, 1]")
            .sample(rng)
    }

    fn mechanism_log_density(&self, y: &i64, x: &u64, _z: &()) -> f64 {
        log_pmf_unchecked(y - *x as i64, self.scale)
    }

    fn mechanism_log_density_sup(&self, _x: &u64, _z: &()) -> f64 {
        log_pmf_unchecked(0, self.scale)
    }
}

impl FiniteModel for BetaBinomialDesk {
    fn theta_grid(&self, _z: &()) -> Vec<f64> {
        self.grid.clone()
    }

    fn data_space_size(&self, _z: &()) -> usize {
        self.n as usize + 1
    }

    fn data_support(&self, theta: &f64, _z: &()) -> Vec<(u64, f64)> {
        binomial_pmf(self.n, *theta)
            .into_iter()
            .enumerate()
            .map(|(x, p)| (x as u64, p))
            .collect()
    }
}

/// Categorical proposal on a finite set of parameter values.
#[derive(Debug, Clone)]
pub struct GridProposal {
    values: Vec<f64>,
    log_mass: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl GridProposal {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} values with {} weights",
                values.len(),
                weights.len()
            )));
        }
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidInput(format!("proposal weights: {e}")))?;
        let total: f64 = weights.iter().sum();
        let log_mass = weights.iter().map(|w| (w / total).ln()).collect();
        Ok(Self {
            values,
            log_mass,
            sampler,
        })
    }
}

impl Proposal<f64> for GridProposal {
    fn sample(&self, rng: &mut Stream) -> f64 {
        self.values[self.sampler.sample(rng)]
    }

    fn log_density(&self, theta: &f64) -> f64 {
        self.values
            .iter()
            .position(|v| (v - theta).abs() <= 1e-12)
            .map_or(f64::NEG_INFINITY, |k| self.log_mass[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{
        exhaustive_posterior_oracle, importance_posterior, rejection_posterior, PriorProposal,
        DEFAULT_PROPOSALS_PER_DRAW,
    };
    use crate::rng;

    #[test]
    fn degenerate_mechanism_accepts_consistent_draws_only() {
        let model = BetaBinomialDesk::new(4, 5, 1.0, 1.0, f64::INFINITY, 1.0).unwrap();
        // y = 0 rules out θ = 1; y = 4 rules out θ = 0.
        let post = rejection_posterior(&model, &0, &(), 2000, 10_000_000, 1).unwrap();
        assert!(post.draws.iter().all(|&t| t < 1.0));
        let post = rejection_posterior(&model, &4, &(), 2000, 10_000_000, 1).unwrap();
        assert!(post.draws.iter().all(|&t| t > 0.0));
        let oracle = exhaustive_posterior_oracle(&model, &0, &()).unwrap();
        assert_eq!(oracle.mass[4], 0.0);
    }

    #[test]
    fn flat_mechanism_gives_prior() {
        let model = BetaBinomialDesk::new(4, 5, 2.0, 3.0, 1e-300, 1.0).unwrap();
        let oracle = exhaustive_posterior_oracle(&model, &2, &()).unwrap();
        for (a, b) in oracle.mass.iter().zip(model.prior_mass()) {
            assert!((a - b).abs() < 1e-12);
        }
        let post = rejection_posterior(&model, &2, &(), 1000, 1000, 2).unwrap();
        assert_eq!(post.proposals, 1000);
    }

    #[test]
    fn oracle_two_state_by_hand() {
        // θ ∈ {0, 1}, n = 1: x = θ. Posterior odds are the mechanism ratio.
        let model = BetaBinomialDesk::new(1, 2, 1.0, 1.0, 1.0, 1.0).unwrap();
        let oracle = exhaustive_posterior_oracle(&model, &0, &()).unwrap();
        let e = std::f64::consts::E;
        assert!((oracle.mass[0] - e / (1.0 + e)).abs() < 1e-15);
        let total: f64 = oracle.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_refuses_large_spaces() {
        let model = BetaBinomialDesk::new(999_999, 3, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            exhaustive_posterior_oracle(&model, &0, &()),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn budget_exhaustion_reports_diagnostics() {
        let model = BetaBinomialDesk::new(8, 21, 1.0, 1.0, 10.0, 1.0).unwrap();
        match rejection_posterior(&model, &40, &(), 10, 5000, 3) {
            Err(Error::BudgetExhausted {
                requested,
                accepted,
                proposals,
                ..
            }) => {
                assert_eq!(requested, 10);
                assert!(accepted < 10);
                assert_eq!(proposals, 5000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejection_is_deterministic() {
        let model = BetaBinomialDesk::desk();
        let a = rejection_posterior(&model, &3, &(), 5000, DEFAULT_PROPOSALS_PER_DRAW, 9).unwrap();
        let b = rejection_posterior(&model, &3, &(), 5000, DEFAULT_PROPOSALS_PER_DRAW, 9).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.proposals, b.proposals);
    }

    /// Adds a constant to the mechanism log density and its supremum.
    struct Shifted(BetaBinomialDesk, f64);

    impl GenerativeModel for Shifted {
        type Theta = f64;
        type Data = u64;
        type Output = i64;
        type Public = ();

        fn sample_prior(&self, z: &(), rng: &mut Stream) -> f64 {
            self.0.sample_prior(z, rng)
        }
        fn prior_log_density(&self, theta: &f64, z: &()) -> f64 {
            self.0.prior_log_density(theta, z)
        }
        fn sample_data(&self, theta: &f64, z: &(), rng: &mut Stream) -> u64 {
            self.0.sample_data(theta, z, rng)
        }
        fn mechanism_log_density(&self, y: &i64, x: &u64, z: &()) -> f64 {
            self.0.mechanism_log_density(y, x, z) + self.1
        }
        fn mechanism_log_density_sup(&self, x: &u64, z: &()) -> f64 {
            self.0.mechanism_log_density_sup(x, z) + self.1
        }
    }

    #[test]
    fn acceptance_invariant_to_density_scale() {
        let base = rejection_posterior(&BetaBinomialDesk::desk(), &3, &(), 3000, 10_000_000, 4).unwrap();
        let shifted = rejection_posterior(&Shifted(BetaBinomialDesk::desk(), 8.0), &3, &(), 3000, 10_000_000, 4).unwrap();
        assert_eq!(base.draws, shifted.draws);
    }

    #[test]
    fn inflated_density_is_rejected() {
        assert!(rejection_posterior(&Shifted(BetaBinomialDesk::desk(), 8.0), &3, &(), 1, 100, 4).is_ok());
        struct Broken(BetaBinomialDesk);
        impl GenerativeModel for Broken {
            type Theta = f64;
            type Data = u64;
            type Output = i64;
            type Public = ();
            fn sample_prior(&self, z: &(), rng: &mut Stream) -> f64 {
                self.0.sample_prior(z, rng)
            }
            fn prior_log_density(&self, theta: &f64, z: &()) -> f64 {
                self.0.prior_log_density(theta, z)
            }
            fn sample_data(&self, theta: &f64, z: &(), rng: &mut Stream) -> u64 {
                self.0.sample_data(theta, z, rng)
            }
            fn mechanism_log_density(&self, _y: &i64, _x: &u64, _z: &()) -> f64 {
                1.0
            }
            fn mechanism_log_density_sup(&self, _x: &u64, _z: &()) -> f64 {
                0.0
            }
        }
        assert!(matches!(
            rejection_posterior(&Broken(BetaBinomialDesk::desk()), &3, &(), 1, 100, 4),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn importance_basics() {
        let model = BetaBinomialDesk::desk();
        let prior = PriorProposal { model: &model, z: &() };
        let one = importance_posterior(&model, &3, &(), 2000, &prior, |_| 1.0, 5).unwrap();
        assert_eq!(one.estimate, 1.0);
        let sum: f64 = one.posterior.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(one.posterior.weights.iter().all(|&w| w >= 0.0));
        assert!(one.posterior.ess <= 2000.0 + 1e-9);

        // With g = prior every weight is a mechanism density, so the
        // unnormalized weight ratio of two draws is the density ratio.
        let flat = BetaBinomialDesk::new(8, 21, 1.0, 1.0, 1e-300, 1.0).unwrap();
        let prior = PriorProposal { model: &flat, z: &() };
        let est = importance_posterior(&flat, &3, &(), 777, &prior, |t| *t, 6).unwrap();
        assert_eq!(est.posterior.ess, 777.0);
    }

    #[test]
    fn importance_degenerate_weights() {
        let model = BetaBinomialDesk::new(4, 5, 1.0, 1.0, f64::INFINITY, 1.0).unwrap();
        let g = GridProposal::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(
            importance_posterior(&model, &3, &(), 100, &g, |t| *t, 7),
            Err(Error::DegenerateWeights(_))
        ));
    }

    #[test]
    fn importance_tracks_oracle() {
        let model = BetaBinomialDesk::desk();
        let oracle = exhaustive_posterior_oracle(&model, &3, &()).unwrap();
        let g = GridProposal::new(model.grid().to_vec(), oracle.mass.iter().map(|m| m + 0.01).collect()).unwrap();
        let est = importance_posterior(&model, &3, &(), 50_000, &g, |t| *t, 8).unwrap();
        let truth = oracle.mean_by(|t| *t);
        assert!((est.estimate - truth).abs() < 4.0 * est.standard_error, "{} vs {truth}", est.estimate);
    }

    #[test]
    fn prior_sampler_matches_grid() {
        let model = BetaBinomialDesk::new(3, 5, 2.0, 1.0, 1.0, 1.0).unwrap();
        let mut r = rng::root(10);
        for _ in 0..100 {
            let t = model.sample_prior(&(), &mut r);
            assert!(model.prior_log_density(&t, &()).is_finite());
        }
        assert_eq!(model.prior_log_density(&0.0, &()), f64::NEG_INFINITY);
        assert_eq!(model.prior_log_density(&0.3, &()), f64::NEG_INFINITY);
    }
}
