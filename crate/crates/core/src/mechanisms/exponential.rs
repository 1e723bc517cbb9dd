use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::{
    constrained_chain_sample, ChainConstraints, ChainDiagnostics, ChainState, ChainTarget, Move,
    StepLaw,
};
use super::dirichlet::DirichletMultinomial;
use super::laplace;
use crate::error::{Error, Result};
use crate::postprocess::congenial_postprocess;

/// Pseudo-count given to counties with no cases in the prior month, so the
/// prior-congenial base measure keeps full support.
pub const ZERO_PRIOR_PSEUDO_COUNT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    LInf,
}

impl Norm {
    pub fn of<I: IntoIterator<Item = f64>>(&self, values: I) -> f64 {
        let values = values.into_iter();
        match self {
            Norm::L1 => values.map(f64::abs).sum(),
            Norm::L2 => values.map(|v| v * v).sum::<f64>().sqrt(),
            Norm::LInf => values.map(f64::abs).fold(0.0, f64::max),
        }
    }
}

/// Loss of an output against the confidential statistic `T(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    /// `‖y − T(x)‖`.
    Norm(Norm),
    /// `½‖y − T(x)‖₂²`, whose gradient is `y − T(x)`.
    Quadratic,
}

/// Reference measure of the release density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaseMeasure {
    /// Counting measure on the integer lattice (Lebesgue for real outputs).
    Naive,
    /// Counting measure on integer points with the public case total and,
    /// optionally, `cases ≥ deaths ≥ 0`.
    DeterministicCongenial { total: u64, ordering: bool },
    /// The congenial set weighted by a Dirichlet-Multinomial prior on cases
    /// with concentrations `alpha · prior_counts`.
    PriorCongenial {
        total: u64,
        alpha: f64,
        prior_counts: Vec<u64>,
        ordering: bool,
    },
}

impl BaseMeasure {
    pub fn validate(&self) -> Result<()> {
        if let BaseMeasure::PriorCongenial {
            alpha,
            prior_counts,
            ..
        } = self
        {
            if !(*alpha > 0.0) || !alpha.is_finite() {
                return Err(Error::Validation(format!("concentration {alpha} must be positive")));
            }
            if !prior_counts.iter().any(|&c| c > 0) {
                return Err(Error::Validation(
                    "prior counts need at least one positive entry".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_congenial(&self) -> bool {
        !matches!(self, BaseMeasure::Naive)
    }

    fn constraints(&self) -> ChainConstraints {
        match *self {
            BaseMeasure::Naive => ChainConstraints::NONE,
            BaseMeasure::DeterministicCongenial { total, ordering }
            | BaseMeasure::PriorCongenial {
                total, ordering, ..
            } => ChainConstraints {
                total: Some(total as i64),
                ordering,
            },
        }
    }

    fn prior(&self) -> Result<Option<DirichletMultinomial>> {
        match self {
            BaseMeasure::PriorCongenial {
                total,
                alpha,
                prior_counts,
                ..
            } => {
                let alphas = prior_counts
                    .iter()
                    .map(|&c| alpha * if c == 0 { ZERO_PRIOR_PSEUDO_COUNT } else { c as f64 })
                    .collect();
                Ok(Some(DirichletMultinomial::new(alphas, *total)?))
            }
            _ => Ok(None),
        }
    }
}

/// Sampler settings for base measures without a closed-form sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainSettings {
    /// Sweeps before the returned draw; `None` means `50·J`.
    pub burn_in_sweeps: Option<usize>,
    /// Sweeps between retained draws of [`sample_replicates`]; `None` means `J`.
    pub thin_sweeps: Option<usize>,
    /// Largest proposal step; `None` picks one from the total or the noise scale.
    pub max_step: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub epsilon: f64,
    /// σ(Δ_z) for the exponential mechanism, σ_y(Δ_z) for the gradient one.
    pub sensitivity: f64,
    pub loss: Loss,
    pub base_measure: BaseMeasure,
    pub seed: u64,
    #[serde(default)]
    pub chain: ChainSettings,
}

impl MechanismSpec {
    pub fn new(epsilon: f64, sensitivity: f64, loss: Loss, base_measure: BaseMeasure, seed: u64) -> Result<Self> {
        let spec = Self {
            epsilon,
            sensitivity,
            loss,
            base_measure,
            seed,
            chain: ChainSettings::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidBudget(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(self.sensitivity > 0.0) || !self.sensitivity.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sensitivity {} must be positive and finite",
                self.sensitivity
            )));
        }
        self.base_measure.validate()
    }

    /// Inverse temperature `ε / (2σ)` of the release density.
    pub fn rate(&self) -> f64 {
        self.epsilon / (2.0 * self.sensitivity)
    }
}

/// Confidential counts the loss is measured against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountStatistic {
    pub cases: Vec<i64>,
    /// May be empty for single-block statistics.
    pub deaths: Vec<i64>,
}

impl CountStatistic {
    pub fn new(cases: Vec<i64>, deaths: Vec<i64>) -> Self {
        Self { cases, deaths }
    }

    pub fn scalar(value: i64) -> Self {
        Self {
            cases: vec![value],
            deaths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReleaseValues {
    Counts { cases: Vec<i64>, deaths: Vec<i64> },
    Real(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Release {
    pub values: ReleaseValues,
    pub spec: MechanismSpec,
    pub chain_diagnostics: Option<ChainDiagnostics>,
}

impl Release {
    pub fn counts(&self) -> Option<(&[i64], &[i64])> {
        match &self.values {
            ReleaseValues::Counts { cases, deaths } => Some((cases, deaths)),
            ReleaseValues::Real(_) => None,
        }
    }

    pub fn reals(&self) -> Option<&[f64]> {
        match &self.values {
            ReleaseValues::Real(v) => Some(v),
            ReleaseValues::Counts { .. } => None,
        }
    }
}

/// `−ε L / (2σ)` plus the base-measure weight, with the support indicator.
struct ExpMechTarget<'a> {
    rate: f64,
    norm: Norm,
    statistic: &'a CountStatistic,
    prior: Option<DirichletMultinomial>,
}

impl ExpMechTarget<'_> {
    fn loss(&self, state: &ChainState) -> f64 {
        let diffs = state
            .cases
            .iter()
            .zip(&self.statistic.cases)
            .chain(state.deaths.iter().zip(&self.statistic.deaths))
            .map(|(&y, &x)| (y - x) as f64);
        self.norm.of(diffs)
    }

    fn loss_after(&self, state: &ChainState, mv: &Move) -> f64 {
        let adjust = |block_is_cases: bool, county: usize, value: i64| -> i64 {
            match *mv {
                Move::Transfer { from, to, amount } if block_is_cases => {
                    if county == from {
                        value - amount
                    } else if county == to {
                        value + amount
                    } else {
                        value
                    }
                }
                Move::Case { county: c, delta } if block_is_cases && c == county => value + delta,
                Move::Death { county: c, delta } if !block_is_cases && c == county => value + delta,
                _ => value,
            }
        };
        let cases = state
            .cases
            .iter()
            .enumerate()
            .zip(&self.statistic.cases)
            .map(|((j, &y), &x)| (adjust(true, j, y) - x) as f64);
        let deaths = state
            .deaths
            .iter()
            .enumerate()
            .zip(&self.statistic.deaths)
            .map(|((j, &y), &x)| (adjust(false, j, y) - x) as f64);
        self.norm.of(cases.chain(deaths))
    }

    /// Exact L1 loss change touching only the moved coordinates.
    fn l1_change(&self, state: &ChainState, mv: &Move) -> f64 {
        let term = |y: i64, x: i64, step: i64| ((y + step - x).abs() - (y - x).abs()) as f64;
        let stat = self.statistic;
        match *mv {
            Move::Transfer { from, to, amount } => {
                term(state.cases[from], stat.cases[from], -amount)
                    + term(state.cases[to], stat.cases[to], amount)
            }
            Move::Case { county, delta } => term(state.cases[county], stat.cases[county], delta),
            Move::Death { county, delta } => match stat.deaths.get(county) {
                Some(&x) => term(state.deaths[county], x, delta),
                None => 0.0,
            },
        }
    }

    fn prior_term(&self, state: &ChainState) -> f64 {
        match &self.prior {
            Some(dm) => state
                .cases
                .iter()
                .enumerate()
                .map(|(j, &y)| dm.coordinate_term(j, y))
                .sum(),
            None => 0.0,
        }
    }
}

impl ChainTarget for ExpMechTarget<'_> {
    fn log_density(&self, state: &ChainState) -> f64 {
        -self.rate * self.loss(state) + self.prior_term(state)
    }

    fn log_density_change(&self, state: &ChainState, _current: f64, mv: &Move) -> f64 {
        let loss_change = match self.norm {
            Norm::L1 => self.l1_change(state, mv),
            _ => self.loss_after(state, mv) - self.loss(state),
        };
        let prior_change = match (&self.prior, mv) {
            (Some(dm), Move::Transfer { from, to, amount }) => {
                let (from, to) = (*from, *to);
                dm.coordinate_term(from, state.cases[from] - amount)
                    + dm.coordinate_term(to, state.cases[to] + amount)
                    - dm.coordinate_term(from, state.cases[from])
                    - dm.coordinate_term(to, state.cases[to])
            }
            (Some(dm), Move::Case { county, delta }) => {
                dm.coordinate_term(*county, state.cases[*county] + delta)
                    - dm.coordinate_term(*county, state.cases[*county])
            }
            _ => 0.0,
        };
        -self.rate * loss_change + prior_change
    }
}

fn check_statistic(spec: &MechanismSpec, statistic: &CountStatistic) -> Result<()> {
    if statistic.cases.is_empty() {
        return Err(Error::InvalidInput("statistic has no coordinates".into()));
    }
    if !statistic.deaths.is_empty() && statistic.deaths.len() != statistic.cases.len() {
        return Err(Error::InvalidInput(format!(
            "{} death coordinates for {} counties",
            statistic.deaths.len(),
            statistic.cases.len()
        )));
    }
    if let BaseMeasure::PriorCongenial { prior_counts, .. } = &spec.base_measure {
        if prior_counts.len() != statistic.cases.len() {
            return Err(Error::InvalidInput(format!(
                "{} prior counts for {} counties",
                prior_counts.len(),
                statistic.cases.len()
            )));
        }
    }
    if let BaseMeasure::DeterministicCongenial { ordering: true, .. }
    | BaseMeasure::PriorCongenial { ordering: true, .. } = spec.base_measure
    {
        if statistic.deaths.is_empty() {
            return Err(Error::InvalidInput(
                "ordering constraint needs a death block in the statistic".into(),
            ));
        }
    }
    Ok(())
}

/// Unnormalized log density of the exponential mechanism at `y`, including
/// the base-measure weight; `-inf` off the base-measure support.
pub fn exp_mech_log_density(spec: &MechanismSpec, statistic: &CountStatistic, y: &ChainState) -> Result<f64> {
    spec.validate()?;
    check_statistic(spec, statistic)?;
    let norm = match spec.loss {
        Loss::Norm(norm) => norm,
        Loss::Quadratic => {
            return Err(Error::Unsupported(
                "exponential mechanism is implemented for norm losses".into(),
            ))
        }
    };
    if !spec.base_measure.constraints().admits(y) {
        return Ok(f64::NEG_INFINITY);
    }
    let target = ExpMechTarget {
        rate: spec.rate(),
        norm,
        statistic,
        prior: spec.base_measure.prior()?,
    };
    Ok(target.log_density(y))
}

/// Draws one release from `f(y) ∝ exp(−ε L(y) / (2σ))` with respect to the
/// configured base measure.
///
/// Naive base measure with an L1 loss factorizes into independent discrete
/// Laplace noise at scale `ε/(2σ)` and is sampled exactly. Every other
/// combination runs the constrained Metropolis chain, started from the
/// deterministic congenial projection of the statistic.
pub fn wasserstein_exp_mech<R: Rng + ?Sized>(
    spec: &MechanismSpec,
    statistic: &CountStatistic,
    rng: &mut R,
) -> Result<Release> {
    spec.validate()?;
    check_statistic(spec, statistic)?;
    let norm = match spec.loss {
        Loss::Norm(norm) => norm,
        Loss::Quadratic => {
            return Err(Error::Unsupported(
                "exponential mechanism is implemented for norm losses".into(),
            ))
        }
    };
    let rate = spec.rate();

    if spec.base_measure == BaseMeasure::Naive && norm == Norm::L1 {
        let mut noisy = |x: &i64| x + laplace::sample_unchecked(rate, rng);
        let cases = statistic.cases.iter().map(&mut noisy).collect();
        let deaths = statistic.deaths.iter().map(&mut noisy).collect();
        return Ok(Release {
            values: ReleaseValues::Counts { cases, deaths },
            spec: spec.clone(),
            chain_diagnostics: None,
        });
    }

    let constraints = spec.base_measure.constraints();
    let init = initial_state(spec, statistic)?;
    let j = statistic.cases.len();
    let sweeps = spec.chain.burn_in_sweeps.unwrap_or(50 * j);
    let step = StepLaw::up_to(spec.chain.max_step.unwrap_or_else(|| default_max_step(spec, statistic)));
    let target = ExpMechTarget {
        rate,
        norm,
        statistic,
        prior: spec.base_measure.prior()?,
    };
    let (state, diagnostics) = constrained_chain_sample(&target, &constraints, init, sweeps, step, rng)?;
    Ok(Release {
        values: ReleaseValues::Counts {
            cases: state.cases,
            deaths: state.deaths,
        },
        spec: spec.clone(),
        chain_diagnostics: Some(diagnostics),
    })
}

/// Several draws from a single chain: burn-in, then one draw every
/// `thin_sweeps` sweeps.
pub fn sample_replicates<R: Rng + ?Sized>(
    spec: &MechanismSpec,
    statistic: &CountStatistic,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Release>> {
    let first = wasserstein_exp_mech(spec, statistic, rng)?;
    let Some(_) = first.chain_diagnostics else {
        let mut out = vec![first];
        for _ in 1..count {
            out.push(wasserstein_exp_mech(spec, statistic, rng)?);
        }
        return Ok(out);
    };
    let j = statistic.cases.len();
    let mut thinned = spec.clone();
    thinned.chain.burn_in_sweeps = Some(spec.chain.thin_sweeps.unwrap_or(j));
    let mut out = vec![first];
    while out.len() < count {
        let last = out.last().expect("nonempty");
        let (cases, deaths) = last.counts().expect("count release");
        let start = CountStatistic::new(cases.to_vec(), deaths.to_vec());
        out.push(continue_chain(&thinned, statistic, start, rng)?);
    }
    Ok(out)
}

fn continue_chain<R: Rng + ?Sized>(
    spec: &MechanismSpec,
    statistic: &CountStatistic,
    start: CountStatistic,
    rng: &mut R,
) -> Result<Release> {
    let Loss::Norm(norm) = spec.loss else {
        unreachable!("checked by the first draw")
    };
    let target = ExpMechTarget {
        rate: spec.rate(),
        norm,
        statistic,
        prior: spec.base_measure.prior()?,
    };
    let step = StepLaw::up_to(spec.chain.max_step.unwrap_or_else(|| default_max_step(spec, statistic)));
    let init = ChainState::new(start.cases, start.deaths);
    let (state, diagnostics) = constrained_chain_sample(
        &target,
        &spec.base_measure.constraints(),
        init,
        spec.chain.burn_in_sweeps.unwrap_or(1),
        step,
        rng,
    )?;
    Ok(Release {
        values: ReleaseValues::Counts {
            cases: state.cases,
            deaths: state.deaths,
        },
        spec: spec.clone(),
        chain_diagnostics: Some(diagnostics),
    })
}

fn default_max_step(spec: &MechanismSpec, statistic: &CountStatistic) -> i64 {
    match spec.base_measure {
        BaseMeasure::DeterministicCongenial { total, .. } | BaseMeasure::PriorCongenial { total, .. } => {
            total.max(1) as i64
        }
        BaseMeasure::Naive => {
            // A few noise radii: ‖y − x‖ is Gamma(d, 2σ/ε)-like.
            let dim = (statistic.cases.len() + statistic.deaths.len()) as f64;
            let radius = dim / spec.rate();
            radius.clamp(1.0, 1e12) as i64
        }
    }
}

/// The congenial projection of the statistic, or the statistic itself under
/// the naive base measure.
fn initial_state(spec: &MechanismSpec, statistic: &CountStatistic) -> Result<ChainState> {
    match spec.base_measure {
        BaseMeasure::Naive => Ok(ChainState::new(statistic.cases.clone(), statistic.deaths.clone())),
        BaseMeasure::DeterministicCongenial { total, ordering }
        | BaseMeasure::PriorCongenial {
            total, ordering, ..
        } => {
            let cases: Vec<f64> = statistic.cases.iter().map(|&c| c as f64).collect();
            if statistic.deaths.is_empty() {
                let zeros = vec![0.0; cases.len()];
                let (c, _) = congenial_postprocess(&cases, &zeros, total)?;
                return Ok(ChainState::cases_only(c.into_iter().map(|v| v as i64).collect()));
            }
            let deaths: Vec<f64> = if ordering {
                statistic.deaths.iter().map(|&d| d as f64).collect()
            } else {
                vec![0.0; cases.len()]
            };
            let (c, d) = congenial_postprocess(&cases, &deaths, total)?;
            let deaths = if ordering {
                d.into_iter().map(|v| v as i64).collect()
            } else {
                statistic.deaths.clone()
            };
            Ok(ChainState::new(c.into_iter().map(|v| v as i64).collect(), deaths))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::laplace::discrete_laplace_pmf;
    use crate::rng;

    fn naive_l1(epsilon: f64, sigma: f64) -> MechanismSpec {
        MechanismSpec::new(epsilon, sigma, Loss::Norm(Norm::L1), BaseMeasure::Naive, 0).unwrap()
    }

    #[test]
    fn naive_l1_density_is_discrete_laplace() {
        // Normalize exp(−ε|y − 10|/(2σ)) over a wide window and compare.
        let spec = naive_l1(1.0, 2.0);
        let stat = CountStatistic::scalar(10);
        let window: Vec<i64> = (10 - 400..=10 + 400).collect();
        let logs: Vec<f64> = window
            .iter()
            .map(|&y| exp_mech_log_density(&spec, &stat, &ChainState::cases_only(vec![y])).unwrap())
            .collect();
        let z: f64 = logs.iter().map(|l| l.exp()).sum();
        let worst = window
            .iter()
            .zip(&logs)
            .map(|(&y, l)| (l.exp() / z - discrete_laplace_pmf(y - 10, 0.25).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-10, "max pmf error {worst}");
    }

    #[test]
    fn naive_l1_sampler_shape() {
        let spec = naive_l1(1.0, 2.0);
        let stat = CountStatistic::scalar(10);
        let mut r = rng::root(21);
        let n = 50_000;
        let zeros = (0..n)
            .filter(|_| {
                let rel = wasserstein_exp_mech(&spec, &stat, &mut r).unwrap();
                rel.counts().unwrap().0[0] == 10
            })
            .count() as f64
            / n as f64;
        let p0 = discrete_laplace_pmf(0, 0.25).unwrap();
        assert!((zeros - p0).abs() < 4.0 * (p0 * (1.0 - p0) / n as f64).sqrt());
    }

    #[test]
    fn huge_epsilon_returns_minimizer() {
        let mut r = rng::root(22);
        let spec = naive_l1(1e12, 2.0);
        let stat = CountStatistic::new(vec![4, 9], vec![1, 0]);
        let rel = wasserstein_exp_mech(&spec, &stat, &mut r).unwrap();
        assert_eq!(rel.counts().unwrap(), (&[4, 9][..], &[1, 0][..]));

        let congenial = MechanismSpec::new(
            1e12,
            2.0,
            Loss::Norm(Norm::L2),
            BaseMeasure::DeterministicCongenial {
                total: 13,
                ordering: true,
            },
            0,
        )
        .unwrap();
        let rel = wasserstein_exp_mech(&congenial, &stat, &mut r).unwrap();
        assert_eq!(rel.counts().unwrap(), (&[4, 9][..], &[1, 0][..]));
    }

    #[test]
    fn congenial_releases_satisfy_constraints() {
        let stat = CountStatistic::new(vec![120, 30, 4, 0], vec![10, 2, 1, 0]);
        let mut r = rng::root(23);
        for base in [
            BaseMeasure::DeterministicCongenial {
                total: 150,
                ordering: true,
            },
            BaseMeasure::PriorCongenial {
                total: 150,
                alpha: 1.0,
                prior_counts: vec![100, 40, 5, 0],
                ordering: true,
            },
        ] {
            for epsilon in [0.01, 1.0] {
                let spec = MechanismSpec::new(epsilon, 2.0, Loss::Norm(Norm::L2), base.clone(), 0).unwrap();
                for _ in 0..20 {
                    let rel = wasserstein_exp_mech(&spec, &stat, &mut r).unwrap();
                    let (c, d) = rel.counts().unwrap();
                    assert_eq!(c.iter().sum::<i64>(), 150);
                    assert!(c.iter().zip(d).all(|(&c, &d)| c >= d && d >= 0));
                    assert!(rel.chain_diagnostics.is_some());
                }
            }
        }
    }

    #[test]
    fn local_l1_change_matches_full_loss() {
        use rand::Rng;
        let stat = CountStatistic::new(vec![5, -3, 8], vec![1, 0, 2]);
        let target = ExpMechTarget {
            rate: 1.0,
            norm: Norm::L1,
            statistic: &stat,
            prior: None,
        };
        let mut r = rng::root(26);
        let mut state = ChainState::new(vec![0, 0, 0], vec![0, 0, 0]);
        for _ in 0..500 {
            let (a, b) = (r.random_range(0..3), r.random_range(0..3));
            let step = r.random_range(-6..=6);
            let mv = match r.random_range(0..3) {
                0 if a != b => Move::Transfer { from: a, to: b, amount: step },
                1 => Move::Case { county: a, delta: step },
                _ => Move::Death { county: b, delta: step },
            };
            let full = target.loss_after(&state, &mv) - target.loss(&state);
            assert_eq!(target.l1_change(&state, &mv), full);
            state.apply(&mv);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(MechanismSpec::new(0.0, 1.0, Loss::Norm(Norm::L1), BaseMeasure::Naive, 0).is_err());
        assert!(MechanismSpec::new(1.0, 0.0, Loss::Norm(Norm::L1), BaseMeasure::Naive, 0).is_err());
        let bad_prior = BaseMeasure::PriorCongenial {
            total: 3,
            alpha: 1.0,
            prior_counts: vec![0, 0],
            ordering: false,
        };
        assert!(MechanismSpec::new(1.0, 1.0, Loss::Norm(Norm::L1), bad_prior, 0).is_err());
        let quad = MechanismSpec::new(1.0, 1.0, Loss::Quadratic, BaseMeasure::Naive, 0).unwrap();
        let mut r = rng::root(24);
        assert!(matches!(
            wasserstein_exp_mech(&quad, &CountStatistic::scalar(1), &mut r),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn off_support_density() {
        let spec = MechanismSpec::new(
            1.0,
            1.0,
            Loss::Norm(Norm::L1),
            BaseMeasure::DeterministicCongenial {
                total: 5,
                ordering: false,
            },
            0,
        )
        .unwrap();
        let stat = CountStatistic::new(vec![2, 3], vec![]);
        let off = exp_mech_log_density(&spec, &stat, &ChainState::cases_only(vec![2, 2])).unwrap();
        assert_eq!(off, f64::NEG_INFINITY);
        let on = exp_mech_log_density(&spec, &stat, &ChainState::cases_only(vec![2, 3])).unwrap();
        assert_eq!(on, 0.0);
    }

    /// Without ordering the chain targets exp(−ε|y−x|₁/(2σ)) on the simplex
    /// slice; compare against the enumerated law for J = 2.
    #[test]
    fn congenial_chain_matches_enumeration() {
        let spec = MechanismSpec {
            chain: ChainSettings {
                burn_in_sweeps: Some(20),
                ..Default::default()
            },
            ..MechanismSpec::new(
                1.0,
                1.0,
                Loss::Norm(Norm::L1),
                BaseMeasure::DeterministicCongenial {
                    total: 6,
                    ordering: false,
                },
                0,
            )
            .unwrap()
        };
        let stat = CountStatistic::new(vec![1, 4], vec![]);
        let exact: Vec<f64> = {
            let w: Vec<f64> = (0..=6)
                .map(|a| exp_mech_log_density(&spec, &stat, &ChainState::cases_only(vec![a, 6 - a])).unwrap().exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.iter().map(|v| v / z).collect()
        };
        let mut r = rng::root(25);
        let draws = sample_replicates(&spec, &stat, 40_000, &mut r).unwrap();
        let mut freq = [0f64; 7];
        for d in &draws {
            freq[d.counts().unwrap().0[0] as usize] += 1.0 / draws.len() as f64;
        }
        let tv: f64 = 0.5 * freq.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.02, "tv {tv}: {freq:?} vs {exact:?}");
    }
}
