use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Strategy};
use crate::domain::{CountPanel, PublicInfo};
use crate::error::{Error, Result};
use crate::mechanisms::exponential::{
    wasserstein_exp_mech, BaseMeasure, CountStatistic, Loss, MechanismSpec, Norm,
};
use crate::mechanisms::laplace::sample_discrete_laplace;
use crate::postprocess::congenial_postprocess;
use crate::rng::{self, Stream};

/// One synthetic month of one replicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replicate {
    pub replicate: usize,
    pub month: usize,
    pub cases: Vec<i64>,
    pub deaths: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub county: usize,
    pub month: usize,
    pub replicate: usize,
    /// `|synthetic − true| / max(true, 1) · 100`.
    pub case_error: f64,
    pub death_error: f64,
}

/// Contraction counts for one county-month, summed over replicates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub county: usize,
    pub month: usize,
    pub case_zeros: u64,
    pub death_zeros: u64,
    pub rates: u64,
}

impl ContractionRow {
    pub fn total(&self) -> u64 {
        self.case_zeros + self.death_zeros + self.rates
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthFailure {
    pub month: usize,
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: Strategy,
    pub epsilon: f64,
    pub replicates: usize,
    pub relative_error: Vec<ErrorRow>,
    pub contraction: Vec<ContractionRow>,
    pub failures: Vec<MonthFailure>,
    /// Mean chain acceptance rate per released month, where a chain ran.
    pub chain_acceptance: Vec<(usize, f64)>,
}

impl MetricsReport {
    /// Mean case relative error of each county over months and replicates.
    pub fn county_case_errors(&self) -> Vec<f64> {
        let counties = self.relative_error.iter().map(|r| r.county + 1).max().unwrap_or(0);
        let mut sum = vec![0.0; counties];
        let mut count = vec![0usize; counties];
        for row in &self.relative_error {
            sum[row.county] += row.case_error;
            count[row.county] += 1;
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
    }

    /// Largest per-county mean case relative error.
    pub fn worst_county_error(&self) -> f64 {
        self.county_case_errors().into_iter().fold(0.0, f64::max)
    }

    pub fn median_case_error(&self) -> f64 {
        let mut v: Vec<f64> = self.relative_error.iter().map(|r| r.case_error).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        crate::stats::median(&mut v)
    }

    /// All contraction events of one county over every month.
    pub fn county_contractions(&self, county: usize) -> u64 {
        self.contraction
            .iter()
            .filter(|r| r.county == county)
            .map(ContractionRow::total)
            .sum()
    }
}

/// Per-county contraction indicators of one projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionEvents {
    pub case_zeros: Vec<bool>,
    pub death_zeros: Vec<bool>,
    pub rates: Vec<bool>,
}

/// Contraction events of a projection, read as:
/// a case zero when positive noisy cases project to zero; a death zero
/// likewise for deaths; a rate contraction when noisy cases exceed noisy
/// deaths but the projection sets them equal (survival rate forced to zero).
pub fn contraction_metrics(
    pre_cases: &[f64],
    pre_deaths: &[f64],
    post_cases: &[u64],
    post_deaths: &[u64],
) -> Result<ContractionEvents> {
    let j = pre_cases.len();
    if pre_deaths.len() != j || post_cases.len() != j || post_deaths.len() != j {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: {} / {} pre, {} / {} post",
            j,
            pre_deaths.len(),
            post_cases.len(),
            post_deaths.len()
        )));
    }
    Ok(ContractionEvents {
        case_zeros: (0..j).map(|k| pre_cases[k] > 0.0 && post_cases[k] == 0).collect(),
        death_zeros: (0..j).map(|k| pre_deaths[k] > 0.0 && post_deaths[k] == 0).collect(),
        rates: (0..j)
            .map(|k| pre_cases[k] > pre_deaths[k] && post_cases[k] == post_deaths[k])
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct SynthesisOutput {
    pub replicates: Vec<Replicate>,
    pub metrics: MetricsReport,
}

struct TaskResult {
    cases: Vec<i64>,
    deaths: Vec<i64>,
    contraction: Option<ContractionEvents>,
    acceptance: Option<f64>,
}

/// Synthesizes every month after the first, `replicates` times each, with
/// the previous month and the current case total as public information.
///
/// Task `(month, replicate)` draws from stream `(month − 1) · replicates +
/// replicate` of the configured seed, so output is independent of the
/// worker count. Failed months are recorded and skipped.
pub fn run_synthesis(config: &ExperimentConfig, panel: &CountPanel) -> Result<SynthesisOutput> {
    config.validate()?;
    if panel.months() < 2 {
        return Err(Error::Validation(
            "synthesis needs at least two months (the first is public context)".into(),
        ));
    }
    let reps = config.replicates;
    let tasks: Vec<(usize, usize)> = (1..panel.months())
        .flat_map(|t| (0..reps).map(move |r| (t, r)))
        .collect();
    let results: Vec<Result<TaskResult>> = tasks
        .par_iter()
        .map(|&(t, r)| {
            let mut stream = rng::stream(config.seed, ((t - 1) * reps + r) as u64);
            synthesize_month(config, panel, t, &mut stream)
        })
        .collect();

    let j = panel.counties();
    let mut replicates = Vec::new();
    let mut relative_error = Vec::new();
    let mut failures = Vec::new();
    let mut contraction: Vec<ContractionRow> = (1..panel.months())
        .flat_map(|t| {
            (0..j).map(move |county| ContractionRow {
                county,
                month: t,
                ..Default::default()
            })
        })
        .collect();
    let mut acceptance_sums = vec![(0.0f64, 0usize); panel.months()];
    for (&(t, r), result) in tasks.iter().zip(results) {
        let res = match result {
            Ok(res) => res,
            Err(e) => {
                failures.push(MonthFailure {
                    month: t,
                    replicate: r,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for county in 0..j {
            relative_error.push(ErrorRow {
                county,
                month: t,
                replicate: r,
                case_error: relative_error_pct(res.cases[county], panel.cases(county, t)),
                death_error: relative_error_pct(res.deaths[county], panel.deaths(county, t)),
            });
        }
        if let Some(events) = &res.contraction {
            for county in 0..j {
                let row = &mut contraction[(t - 1) * j + county];
                row.case_zeros += events.case_zeros[county] as u64;
                row.death_zeros += events.death_zeros[county] as u64;
                row.rates += events.rates[county] as u64;
            }
        }
        if let Some(rate) = res.acceptance {
            acceptance_sums[t].0 += rate;
            acceptance_sums[t].1 += 1;
        }
        replicates.push(Replicate {
            replicate: r,
            month: t,
            cases: res.cases,
            deaths: res.deaths,
        });
    }
    let chain_acceptance = acceptance_sums
        .iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(t, (s, n))| (t, s / *n as f64))
        .collect();
    Ok(SynthesisOutput {
        replicates,
        metrics: MetricsReport {
            strategy: config.strategy,
            epsilon: config.epsilon,
            replicates: reps,
            relative_error,
            contraction,
            failures,
            chain_acceptance,
        },
    })
}

fn relative_error_pct(synthetic: i64, truth: u64) -> f64 {
    (synthetic - truth as i64).abs() as f64 / truth.max(1) as f64 * 100.0
}

fn synthesize_month(
    config: &ExperimentConfig,
    panel: &CountPanel,
    month: usize,
    rng: &mut Stream,
) -> Result<TaskResult> {
    let public = PublicInfo::from_panel(panel, month)?;
    let true_cases: Vec<i64> = panel.month_cases(month).iter().map(|&c| c as i64).collect();
    let true_deaths: Vec<i64> = panel.month_deaths(month).iter().map(|&d| d as i64).collect();

    if config.strategy == Strategy::Postprocess {
        let scale = config.epsilon / config.delta_z;
        let mut noisy = |x: &i64| -> Result<f64> { Ok((x + sample_discrete_laplace(scale, rng)?) as f64) };
        let pre_cases = true_cases.iter().map(&mut noisy).collect::<Result<Vec<f64>>>()?;
        let pre_deaths = true_deaths.iter().map(&mut noisy).collect::<Result<Vec<f64>>>()?;
        let (cases, deaths) = congenial_postprocess(&pre_cases, &pre_deaths, public.current_total)?;
        let contraction = contraction_metrics(&pre_cases, &pre_deaths, &cases, &deaths)?;
        return Ok(TaskResult {
            cases: cases.into_iter().map(|c| c as i64).collect(),
            deaths: deaths.into_iter().map(|d| d as i64).collect(),
            contraction: Some(contraction),
            acceptance: None,
        });
    }

    let base_measure = match config.strategy {
        Strategy::WassersteinNaive => BaseMeasure::Naive,
        Strategy::WassersteinCongenial => BaseMeasure::DeterministicCongenial {
            total: public.current_total,
            ordering: public.ordering_enforced,
        },
        Strategy::WassersteinPrior => BaseMeasure::PriorCongenial {
            total: public.current_total,
            alpha: config.alpha,
            prior_counts: public.prior_cases.clone(),
            ordering: public.ordering_enforced,
        },
        Strategy::Postprocess => unreachable!("handled above"),
    };
    // An L1 count loss moves by at most Δ_z when one count moves by Δ_z.
    let spec = MechanismSpec::new(config.epsilon, config.delta_z, Loss::Norm(Norm::L1), base_measure, config.seed)?;
    let release = wasserstein_exp_mech(&spec, &CountStatistic::new(true_cases, true_deaths), rng)?;
    let (cases, deaths) = release.counts().expect("count release");
    Ok(TaskResult {
        cases: cases.to_vec(),
        deaths: deaths.to_vec(),
        contraction: None,
        acceptance: release.chain_diagnostics.map(|d| d.acceptance_rate),
    })
}

/// `replicate,month,county,cases,deaths`, ordered by replicate, month, county.
pub fn write_replicates_csv<W: Write>(writer: W, replicates: &[Replicate]) -> Result<()> {
    let mut sorted: Vec<&Replicate> = replicates.iter().collect();
    sorted.sort_by_key(|r| (r.replicate, r.month));
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["replicate", "month", "county", "cases", "deaths"])?;
    for rep in sorted {
        for (county, (c, d)) in rep.cases.iter().zip(&rep.deaths).enumerate() {
            out.write_record([
                rep.replicate.to_string(),
                rep.month.to_string(),
                county.to_string(),
                c.to_string(),
                d.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `county,month,replicate,case_relative_error,death_relative_error`.
pub fn write_metrics_csv<W: Write>(writer: W, report: &MetricsReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["county", "month", "replicate", "case_relative_error", "death_relative_error"])?;
    for row in &report.relative_error {
        out.write_record([
            row.county.to_string(),
            row.month.to_string(),
            row.replicate.to_string(),
            format!("{:.6}", row.case_error),
            format!("{:.6}", row.death_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `county,month,contracted_case_zeros,contracted_death_zeros,contracted_rates`.
pub fn write_contraction_csv<W: Write>(writer: W, report: &MetricsReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "county",
        "month",
        "contracted_case_zeros",
        "contracted_death_zeros",
        "contracted_rates",
    ])?;
    for row in &report.contraction {
        out.write_record([
            row.county.to_string(),
            row.month.to_string(),
            row.case_zeros.to_string(),
            row.death_zeros.to_string(),
            row.rates.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ReplicateRow {
    replicate: usize,
    month: usize,
    county: usize,
    cases: i64,
    deaths: i64,
}

/// Reads the output of [`write_replicates_csv`].
pub fn read_replicates_csv<R: std::io::Read>(reader: R) -> Result<Vec<Replicate>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut out: Vec<Replicate> = Vec::new();
    for (i, row) in input.deserialize::<ReplicateRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        let start_new = out
            .last()
            .is_none_or(|last| (last.replicate, last.month) != (row.replicate, row.month));
        if start_new {
            out.push(Replicate {
                replicate: row.replicate,
                month: row.month,
                cases: Vec::new(),
                deaths: Vec::new(),
            });
        }
        let current = out.last_mut().expect("pushed above");
        if row.county != current.cases.len() {
            return Err(Error::Validation(format!(
                "line {line}: expected county {}, found {}",
                current.cases.len(),
                row.county
            )));
        }
        current.cases.push(row.cases);
        current.deaths.push(row.deaths);
    }
    Ok(out)
}

/// Rebuilds month-by-month panels from congenial replicates and checks the
/// panel invariants and the public total of every month.
pub fn validate_replicates(replicates: &[Replicate], panel: &CountPanel) -> Result<()> {
    for rep in replicates {
        if rep.month >= panel.months() || rep.cases.len() != panel.counties() {
            return Err(Error::Validation(format!(
                "replicate {} month {}: shape does not match the {} x {} panel",
                rep.replicate,
                rep.month,
                panel.counties(),
                panel.months()
            )));
        }
        let total: i64 = rep.cases.iter().sum();
        if total != panel.month_total(rep.month) as i64 {
            return Err(Error::Validation(format!(
                "replicate {} month {}: cases sum to {total}, public total is {}",
                rep.replicate,
                rep.month,
                panel.month_total(rep.month)
            )));
        }
        let cases: Option<Vec<Vec<u64>>> = rep.cases.iter().map(|&c| u64::try_from(c).ok().map(|c| vec![c])).collect();
        let deaths: Option<Vec<Vec<u64>>> = rep.deaths.iter().map(|&d| u64::try_from(d).ok().map(|d| vec![d])).collect();
        match (cases, deaths) {
            (Some(c), Some(d)) => {
                CountPanel::new(c, d).map_err(|e| {
                    Error::Validation(format!("replicate {} month {}: {e}", rep.replicate, rep.month))
                })?;
            }
            _ => {
                return Err(Error::Validation(format!(
                    "replicate {} month {}: negative count",
                    rep.replicate, rep.month
                )))
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_definitions() {
        let e = contraction_metrics(&[3.0], &[0.0], &[0], &[0]).unwrap();
        assert_eq!((e.case_zeros[0], e.death_zeros[0]), (true, false));
        let e = contraction_metrics(&[5.0], &[2.0], &[4], &[4]).unwrap();
        assert!(e.rates[0]);
        let e = contraction_metrics(&[5.0, 0.0], &[2.0, 0.0], &[5, 0], &[2, 0]).unwrap();
        assert!(e.case_zeros.iter().chain(&e.death_zeros).chain(&e.rates).all(|x| !x));
        assert!(contraction_metrics(&[1.0], &[1.0, 2.0], &[1], &[1]).is_err());
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error_pct(3, 0), 300.0);
        assert_eq!(relative_error_pct(90, 100), 10.0);
    }
}
