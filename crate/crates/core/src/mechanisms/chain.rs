//! Metropolis sampler on integer (cases, deaths) vectors under an optional
//! fixed case total and the ordering `cases ≥ deaths ≥ 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub cases: Vec<i64>,
    /// Empty when the target has no death coordinates.
    pub deaths: Vec<i64>,
}

impl ChainState {
    pub fn new(cases: Vec<i64>, deaths: Vec<i64>) -> Self {
        Self { cases, deaths }
    }

    pub fn cases_only(cases: Vec<i64>) -> Self {
        Self {
            cases,
            deaths: Vec::new(),
        }
    }

    pub fn counties(&self) -> usize {
        self.cases.len()
    }

    pub fn apply(&mut self, mv: &Move) {
        match *mv {
            Move::Transfer { from, to, amount } => {
                self.cases[from] -= amount;
                self.cases[to] += amount;
            }
            Move::Case { county, delta } => self.cases[county] += delta,
            Move::Death { county, delta } => self.deaths[county] += delta,
        }
    }
}

/// A single proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// Moves `amount` cases from one county to another, keeping the total.
    Transfer { from: usize, to: usize, amount: i64 },
    Case { county: usize, delta: i64 },
    Death { county: usize, delta: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConstraints {
    /// Required case total; `None` leaves the cases unconstrained.
    pub total: Option<i64>,
    /// Enforce `cases ≥ deaths ≥ 0` coordinatewise.
    pub ordering: bool,
}

impl ChainConstraints {
    pub const NONE: Self = Self {
        total: None,
        ordering: false,
    };

    fn cases_nonnegative(&self) -> bool {
        self.total.is_some() || self.ordering
    }

    pub fn admits(&self, state: &ChainState) -> bool {
        if let Some(total) = self.total {
            if state.cases.iter().sum::<i64>() != total {
                return false;
            }
        }
        if self.cases_nonnegative() && state.cases.iter().any(|&c| c < 0) {
            return false;
        }
        if self.ordering
            && state
                .cases
                .iter()
                .zip(&state.deaths)
                .any(|(&c, &d)| d < 0 || d > c)
        {
            return false;
        }
        true
    }

    /// Whether the state stays admissible after `mv`, assuming it is now.
    fn admits_move(&self, state: &ChainState, mv: &Move) -> bool {
        match *mv {
            Move::Transfer { from, amount, to } => {
                let left = state.cases[from] - amount;
                let right = state.cases[to] + amount;
                if self.cases_nonnegative() && (left < 0 || right < 0) {
                    return false;
                }
                !self.ordering || (left >= state.deaths[from] && right >= state.deaths[to])
            }
            Move::Case { county, delta } => {
                let c = state.cases[county] + delta;
                if self.cases_nonnegative() && c < 0 {
                    return false;
                }
                !self.ordering || c >= state.deaths[county]
            }
            Move::Death { county, delta } => {
                let d = state.deaths[county] + delta;
                !self.ordering || (d >= 0 && d <= state.cases[county])
            }
        }
    }
}

/// Unnormalized log density on admissible states.
pub trait ChainTarget {
    fn log_density(&self, state: &ChainState) -> f64;

    /// Change in log density from applying `mv`. Override when a local
    /// update is cheaper than a full re-evaluation.
    fn log_density_change(&self, state: &ChainState, current: f64, mv: &Move) -> f64 {
        let mut next = state.clone();
        next.apply(mv);
        self.log_density(&next) - current
    }
}

impl<F: Fn(&ChainState) -> f64> ChainTarget for F {
    fn log_density(&self, state: &ChainState) -> f64 {
        self(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub sweeps: usize,
    pub proposals: u64,
}

/// Symmetric step law: a scale `2^k` with `k` uniform on `0..=levels`, then
/// a magnitude uniform on `1..=2^k` and a fair sign. Mixing scales keeps
/// both single-unit moves and long jumps available at every state.
#[derive(Debug, Clone, Copy)]
pub struct StepLaw {
    levels: u32,
}

impl StepLaw {
    pub fn up_to(max_step: i64) -> Self {
        let max_step = max_step.max(1) as u64;
        Self {
            levels: 63 - max_step.leading_zeros(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let k = rng.random_range(0..=self.levels);
        let magnitude = rng.random_range(1..=(1i64 << k));
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Runs `sweeps` sweeps from `init` and returns the final state.
///
/// A sweep proposes `J` case moves (pairwise transfers when the total is
/// fixed, single-county changes otherwise) followed by `J` death moves when
/// the state has death coordinates. Proposals are symmetric, so acceptance
/// is the Metropolis ratio of the target; inadmissible proposals are
/// rejected. Pairwise transfers connect every integer point with the same
/// total, and death moves within `[0, cases]` free the ordering, so the
/// chain is irreducible on the constraint set.
pub fn constrained_chain_sample<T, R>(
    target: &T,
    constraints: &ChainConstraints,
    init: ChainState,
    sweeps: usize,
    step: StepLaw,
    rng: &mut R,
) -> Result<(ChainState, ChainDiagnostics)>
where
    T: ChainTarget + ?Sized,
    R: Rng + ?Sized,
{
    if let Some(total) = constraints.total {
        if total < 0 {
            return Err(Error::Infeasible(format!("case total {total} is negative")));
        }
    }
    let j = init.counties();
    if j == 0 {
        return Err(Error::InvalidInput("chain state has no counties".into()));
    }
    if !init.deaths.is_empty() && init.deaths.len() != j {
        return Err(Error::InvalidInput(format!(
            "{} death coordinates for {j} counties",
            init.deaths.len()
        )));
    }
    if constraints.ordering && init.deaths.is_empty() {
        return Err(Error::InvalidInput("ordering constraint needs death coordinates".into()));
    }
    if !constraints.admits(&init) {
        return Err(Error::Infeasible("initial state violates the constraints".into()));
    }
    let mut state = init;
    let mut current = target.log_density(&state);
    if !current.is_finite() {
        return Err(Error::Infeasible(
            "target density is zero at the initial state".into(),
        ));
    }

    let mut proposals = 0u64;
    let mut accepted = 0u64;
    let has_deaths = !state.deaths.is_empty();
    let transfers = constraints.total.is_some();
    for _ in 0..sweeps {
        for _ in 0..j {
            let mv = if transfers {
                if j < 2 {
                    continue;
                }
                let from = rng.random_range(0..j);
                let mut to = rng.random_range(0..j - 1);
                if to >= from {
                    to += 1;
                }
                Move::Transfer {
                    from,
                    to,
                    amount: step.sample(rng),
                }
            } else {
                Move::Case {
                    county: rng.random_range(0..j),
                    delta: step.sample(rng),
                }
            };
            proposals += 1;
            if try_move(target, constraints, &mut state, &mut current, &mv, rng) {
                accepted += 1;
            }
        }
        if has_deaths {
            for _ in 0..j {
                let mv = Move::Death {
                    county: rng.random_range(0..j),
                    delta: step.sample(rng),
                };
                proposals += 1;
                if try_move(target, constraints, &mut state, &mut current, &mv, rng) {
                    accepted += 1;
                }
            }
        }
    }
    let diagnostics = ChainDiagnostics {
        acceptance_rate: if proposals == 0 {
            1.0
        } else {
            accepted as f64 / proposals as f64
        },
        sweeps,
        proposals,
    };
    Ok((state, diagnostics))
}

fn try_move<T, R>(
    target: &T,
    constraints: &ChainConstraints,
    state: &mut ChainState,
    current: &mut f64,
    mv: &Move,
    rng: &mut R,
) -> bool
where
    T: ChainTarget + ?Sized,
    R: Rng + ?Sized,
{
    if !constraints.admits_move(state, mv) {
        return false;
    }
    let change = target.log_density_change(state, *current, mv);
    if change.is_nan() {
        return false;
    }
    if change >= 0.0 || rng.random::<f64>().ln() < change {
        state.apply(mv);
        *current += change;
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::dirichlet::{tests::compositions, DirichletMultinomial};
    use crate::rng;
    use std::collections::HashMap;

    #[test]
    fn uniform_on_two_counties() {
        let target = |_: &ChainState| 0.0;
        let constraints = ChainConstraints {
            total: Some(2),
            ordering: false,
        };
        let mut r = rng::root(11);
        let mut state = ChainState::cases_only(vec![1, 1]);
        let mut counts = HashMap::<Vec<i64>, usize>::new();
        let n = 100_000;
        for _ in 0..n {
            state = constrained_chain_sample(&target, &constraints, state, 1, StepLaw::up_to(2), &mut r)
                .unwrap()
                .0;
            *counts.entry(state.cases.clone()).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // Autocorrelated draws inflate the statistic; allow a generous margin
        // over the 0.999 quantile (13.8) of χ²₂.
        assert!(chi2 < 30.0, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn matches_dirichlet_multinomial() {
        let dm = DirichletMultinomial::new(vec![1.0, 2.0, 0.5], 5).unwrap();
        let target = |s: &ChainState| {
            let y: Vec<u64> = s.cases.iter().map(|&c| c as u64).collect();
            dm.log_pmf(&y).unwrap()
        };
        let constraints = ChainConstraints {
            total: Some(5),
            ordering: false,
        };
        let mut r = rng::root(12);
        let mut state = ChainState::cases_only(vec![2, 2, 1]);
        let mut counts = HashMap::<Vec<u64>, usize>::new();
        let n = 60_000;
        for _ in 0..n {
            state = constrained_chain_sample(&target, &constraints, state, 3, StepLaw::up_to(5), &mut r)
                .unwrap()
                .0;
            let y: Vec<u64> = state.cases.iter().map(|&c| c as u64).collect();
            *counts.entry(y).or_default() += 1;
        }
        let comps = compositions(5, 3);
        assert_eq!(comps.len(), 21);
        let tv: f64 = 0.5
            * comps
                .iter()
                .map(|y| {
                    let p = dm.log_pmf(y).unwrap().exp();
                    let q = *counts.get(y).unwrap_or(&0) as f64 / n as f64;
                    (p - q).abs()
                })
                .sum::<f64>();
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn single_feasible_point() {
        let target = |_: &ChainState| 0.0;
        let constraints = ChainConstraints {
            total: Some(0),
            ordering: true,
        };
        let mut r = rng::root(13);
        let init = ChainState::new(vec![0, 0, 0], vec![0, 0, 0]);
        let (out, _) =
            constrained_chain_sample(&target, &constraints, init.clone(), 50, StepLaw::up_to(4), &mut r).unwrap();
        assert_eq!(out, init);
    }

    #[test]
    fn ordering_preserved_with_deaths() {
        let target = |s: &ChainState| -0.01 * s.deaths.iter().map(|&d| d as f64).sum::<f64>();
        let constraints = ChainConstraints {
            total: Some(30),
            ordering: true,
        };
        let mut r = rng::root(14);
        let mut state = ChainState::new(vec![10, 10, 10], vec![5, 0, 10]);
        for _ in 0..200 {
            state = constrained_chain_sample(&target, &constraints, state, 2, StepLaw::up_to(30), &mut r)
                .unwrap()
                .0;
            assert!(constraints.admits(&state));
        }
    }

    #[test]
    fn infeasible_inputs() {
        let target = |_: &ChainState| 0.0;
        let mut r = rng::root(15);
        let bad_total = ChainConstraints {
            total: Some(-1),
            ordering: false,
        };
        assert!(matches!(
            constrained_chain_sample(&target, &bad_total, ChainState::cases_only(vec![0]), 1, StepLaw::up_to(1), &mut r),
            Err(Error::Infeasible(_))
        ));
        let c = ChainConstraints {
            total: Some(3),
            ordering: true,
        };
        assert!(matches!(
            constrained_chain_sample(&target, &c, ChainState::new(vec![1, 1], vec![0, 0]), 1, StepLaw::up_to(1), &mut r),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn step_law_is_symmetric_and_bounded() {
        let law = StepLaw::up_to(8);
        let mut r = rng::root(16);
        let mut sum = 0i64;
        for _ in 0..10_000 {
            let s = law.sample(&mut r);
            assert!(s != 0 && s.abs() <= 8);
            sum += s;
        }
        assert!((sum as f64 / 10_000.0).abs() < 0.2);
    }
}
