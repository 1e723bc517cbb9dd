//! Python bindings for `etp`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use etp::harness::{run_synthesis, ExperimentConfig, InputSpec, Strategy, SyntheticSpec};
use etp::inference::{self, BetaBinomialDesk, PriorProposal, DEFAULT_PROPOSALS_PER_DRAW};
use etp::mechanisms::{self, BaseMeasure, CountStatistic, Loss, MechanismSpec, Norm};
use etp::sensitivity::{self, CountBoundFamily, DiscretePmf, DEFAULT_GRID_STEPS};
use etp::{harness, ledger, postprocess, rng, Error};

create_exception!(etp_py, EtpError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidBudget(_) | Error::InvalidInput(_) | Error::Validation(_) => PyValueError::new_err(e.to_string()),
        other => EtpError::new_err(other.to_string()),
    }
}

type Counts = (Vec<i64>, Vec<i64>);
type Grid = Vec<Vec<u64>>;

#[pyfunction]
fn compose_sequential(eps: Vec<f64>) -> PyResult<f64> {
    ledger::compose_sequential(&eps).map_err(to_py)
}

#[pyfunction]
fn compose_parallel(eps: Vec<f64>) -> PyResult<f64> {
    ledger::compose_parallel(&eps).map_err(to_py)
}

#[pyfunction]
fn condition_on_public(eps: f64) -> PyResult<f64> {
    ledger::condition_on_public(eps).map_err(to_py)
}

/// Append-only privacy budget ledger.
#[pyclass(frozen)]
struct PrivacyLedger(ledger::PrivacyLedger);

#[pymethods]
impl PrivacyLedger {
    #[new]
    fn new() -> Self {
        Self(ledger::PrivacyLedger::new())
    }

    #[pyo3(signature = (release_id, epsilon, partition_id=None, conditioned=false))]
    fn record(&self, release_id: String, epsilon: f64, partition_id: Option<String>, conditioned: bool) -> PyResult<()> {
        self.0.record(release_id, epsilon, partition_id, conditioned).map_err(to_py)
    }

    fn total(&self) -> f64 {
        self.0.total()
    }

    fn partition_totals(&self) -> BTreeMap<String, f64> {
        self.0.partition_totals()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn discrete_laplace_pmf(k: i64, scale: f64) -> PyResult<f64> {
    mechanisms::discrete_laplace_pmf(k, scale).map_err(to_py)
}

/// `size` draws of discrete Laplace noise with pmf proportional to `exp(-scale |k|)`.
#[pyfunction]
#[pyo3(signature = (scale, size, seed))]
fn sample_discrete_laplace(scale: f64, size: usize, seed: u64) -> PyResult<Vec<i64>> {
    let mut r = rng::root(seed);
    (0..size)
        .map(|_| mechanisms::sample_discrete_laplace(scale, &mut r))
        .collect::<etp::Result<_>>()
        .map_err(to_py)
}

/// Returns `(delta_z, p1, p0)` for the binary count family.
#[pyfunction]
#[pyo3(signature = (n, z0, z1, grid_steps=DEFAULT_GRID_STEPS))]
fn delta_z_count(n: u64, z0: f64, z1: f64, grid_steps: usize) -> PyResult<(u64, f64, f64)> {
    let family = CountBoundFamily::new(n, z0, z1).map_err(to_py)?;
    let d = sensitivity::delta_z_count(&family, grid_steps).map_err(to_py)?;
    Ok((d.delta_z, d.p1, d.p0))
}

/// W-infinity distance between two pmfs given as `(support, mass)` pairs.
#[pyfunction]
fn w_inf(p: (Vec<i64>, Vec<f64>), q: (Vec<i64>, Vec<f64>)) -> PyResult<f64> {
    let p = DiscretePmf::new(p.0, p.1).map_err(to_py)?;
    let q = DiscretePmf::new(q.0, q.1).map_err(to_py)?;
    Ok(sensitivity::w_inf_1d(&p, &q))
}

#[pyfunction]
fn congenial_postprocess(cases: Vec<f64>, deaths: Vec<f64>, total: u64) -> PyResult<(Vec<u64>, Vec<u64>)> {
    postprocess::congenial_postprocess(&cases, &deaths, total).map_err(to_py)
}

/// One release of the exponential mechanism with an L1 loss.
///
/// `base` is `"naive"`, `"congenial"` or `"prior"`; the congenial bases need
/// `total`, and `"prior"` also `prior_counts`.
#[pyfunction]
#[pyo3(signature = (
    cases, deaths, epsilon, sensitivity, base="naive", total=None, prior_counts=None, alpha=1.0,
    ordering=true, seed=0
))]
#[allow(clippy::too_many_arguments)]
fn wasserstein_exp_mech(
    cases: Vec<i64>,
    deaths: Vec<i64>,
    epsilon: f64,
    sensitivity: f64,
    base: &str,
    total: Option<u64>,
    prior_counts: Option<Vec<u64>>,
    alpha: f64,
    ordering: bool,
    seed: u64,
) -> PyResult<Counts> {
    let need_total = || total.ok_or_else(|| PyValueError::new_err(format!("base {base:?} needs total")));
    let base_measure = match base {
        "naive" => BaseMeasure::Naive,
        "congenial" => BaseMeasure::DeterministicCongenial {
            total: need_total()?,
            ordering,
        },
        "prior" => BaseMeasure::PriorCongenial {
            total: need_total()?,
            alpha,
            prior_counts: prior_counts.ok_or_else(|| PyValueError::new_err("base \"prior\" needs prior_counts"))?,
            ordering,
        },
        other => return Err(PyValueError::new_err(format!("unknown base measure {other:?}"))),
    };
    let spec = MechanismSpec::new(epsilon, sensitivity, Loss::Norm(Norm::L1), base_measure, seed).map_err(to_py)?;
    let release = mechanisms::wasserstein_exp_mech(&spec, &CountStatistic::new(cases, deaths), &mut rng::root(seed))
        .map_err(to_py)?;
    let (c, d) = release.counts().expect("count release");
    Ok((c.to_vec(), d.to_vec()))
}

fn desk(n: u64, grid: usize, a: f64, b: f64, epsilon: f64) -> PyResult<BetaBinomialDesk> {
    BetaBinomialDesk::new(n, grid, a, b, epsilon, 1.0).map_err(to_py)
}

/// Exact posterior draws of `θ` for a binomial count released with
/// discrete Laplace noise, under a gridded Beta prior.
#[pyfunction]
#[pyo3(signature = (y, draws, seed, n=8, grid=21, a=1.0, b=1.0, epsilon=1.0, max_proposals=None))]
#[allow(clippy::too_many_arguments)]
fn rejection_posterior<'py>(
    py: Python<'py>,
    y: i64,
    draws: usize,
    seed: u64,
    n: u64,
    grid: usize,
    a: f64,
    b: f64,
    epsilon: f64,
    max_proposals: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let model = desk(n, grid, a, b, epsilon)?;
    let budget = max_proposals.unwrap_or((draws as u64).saturating_mul(DEFAULT_PROPOSALS_PER_DRAW));
    let post = py
        .detach(|| inference::rejection_posterior(&model, &y, &(), draws, budget, seed))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("draws", post.draws)?;
    out.set_item("proposals", post.proposals)?;
    out.set_item("acceptance_rate", post.acceptance_rate)?;
    Ok(out)
}

/// Self-normalized importance estimate of the posterior mean of `θ` with
/// the prior as proposal.
#[pyfunction]
#[pyo3(signature = (y, m, seed, n=8, grid=21, a=1.0, b=1.0, epsilon=1.0))]
#[allow(clippy::too_many_arguments)]
fn importance_posterior<'py>(
    py: Python<'py>,
    y: i64,
    m: usize,
    seed: u64,
    n: u64,
    grid: usize,
    a: f64,
    b: f64,
    epsilon: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let model = desk(n, grid, a, b, epsilon)?;
    let proposal = PriorProposal { model: &model, z: &() };
    let est = py
        .detach(|| inference::importance_posterior(&model, &y, &(), m, &proposal, |t| *t, seed))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("estimate", est.estimate)?;
    out.set_item("standard_error", est.standard_error)?;
    out.set_item("ess", est.posterior.ess)?;
    Ok(out)
}

/// Exact posterior over the grid, as `(thetas, mass)`.
#[pyfunction]
#[pyo3(signature = (y, n=8, grid=21, a=1.0, b=1.0, epsilon=1.0))]
fn posterior_oracle(y: i64, n: u64, grid: usize, a: f64, b: f64, epsilon: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let model = desk(n, grid, a, b, epsilon)?;
    let post = inference::exhaustive_posterior_oracle(&model, &y, &()).map_err(to_py)?;
    Ok((post.thetas, post.mass))
}

/// Synthetic county panel as `(cases, deaths)`, each indexed `[county][month]`.
#[pyfunction]
fn synth_panel(counties: usize, months: usize, seed: u64) -> PyResult<(Grid, Grid)> {
    let panel = harness::synth_panel(counties, months, seed).map_err(to_py)?;
    let cases = (0..counties).map(|j| panel.county_cases(j).to_vec()).collect();
    let deaths = (0..counties)
        .map(|j| (0..months).map(|t| panel.deaths(j, t)).collect())
        .collect();
    Ok((cases, deaths))
}

/// Replicate synthesis on a synthetic panel. Returns the replicates as
/// `(replicate, month, cases, deaths)` tuples plus summary error metrics.
#[pyfunction]
#[pyo3(signature = (
    strategy, epsilon, replicates, seed, counties=10, months=3, panel_seed=0, delta_z=harness::DEFAULT_DELTA_Z,
    alpha=harness::DEFAULT_ALPHA
))]
#[allow(clippy::too_many_arguments)]
fn synthesize<'py>(
    py: Python<'py>,
    strategy: &str,
    epsilon: f64,
    replicates: usize,
    seed: u64,
    counties: usize,
    months: usize,
    panel_seed: u64,
    delta_z: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let strategy: Strategy = strategy.parse().map_err(to_py)?;
    let spec = SyntheticSpec {
        counties,
        months,
        seed: panel_seed,
    };
    let config = ExperimentConfig {
        strategy,
        epsilon,
        delta_z,
        replicates,
        alpha,
        seed,
        input: InputSpec::Synthetic(spec),
    };
    let out = py
        .detach(|| {
            let panel = harness::load_input(&config.input)?;
            run_synthesis(&config, &panel)
        })
        .map_err(to_py)?;
    let reps: Vec<(usize, usize, Vec<i64>, Vec<i64>)> = out
        .replicates
        .into_iter()
        .map(|r| (r.replicate, r.month, r.cases, r.deaths))
        .collect();
    let dict = PyDict::new(py);
    dict.set_item("replicates", reps)?;
    dict.set_item("worst_county_error", out.metrics.worst_county_error())?;
    dict.set_item("median_case_error", out.metrics.median_case_error())?;
    dict.set_item("failures", out.metrics.failures.len())?;
    Ok(dict)
}

#[pymodule]
fn etp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EtpError", m.py().get_type::<EtpError>())?;
    m.add_class::<PrivacyLedger>()?;
    m.add_function(wrap_pyfunction!(compose_sequential, m)?)?;
    m.add_function(wrap_pyfunction!(compose_parallel, m)?)?;
    m.add_function(wrap_pyfunction!(condition_on_public, m)?)?;
    m.add_function(wrap_pyfunction!(discrete_laplace_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(sample_discrete_laplace, m)?)?;
    m.add_function(wrap_pyfunction!(delta_z_count, m)?)?;
    m.add_function(wrap_pyfunction!(w_inf, m)?)?;
    m.add_function(wrap_pyfunction!(congenial_postprocess, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_exp_mech, m)?)?;
    m.add_function(wrap_pyfunction!(rejection_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(importance_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(synth_panel, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    Ok(())
}
