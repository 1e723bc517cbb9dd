use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use statrs::distribution::{ContinuousCDF, Normal as NormalLaw};

use crate::domain::CountPanel;
use crate::error::{Error, Result};
use crate::rng;

/// Median county scale of the synthetic generator.
const MEDIAN_SCALE: f64 = 300.0;
/// Standard deviation of log county scales.
const LOG_SCALE_SD: f64 = 2.0;
const COUNTY_DRIFT_SD: f64 = 0.15;
const COMMON_DRIFT_SD: f64 = 0.1;
const DEATH_RATE: (f64, f64) = (0.005, 0.03);

/// Reads and validates a `county,month,cases,deaths` file.
pub fn ingest_panel(path: &Path) -> Result<CountPanel> {
    let file = File::open(path)?;
    CountPanel::read_csv(file).map_err(|problems| Error::Ingest {
        path: path.to_path_buf(),
        problems,
    })
}

/// Synthetic panel with heterogeneous county sizes and autocorrelated months.
///
/// Log county scales are stratified normal draws (one per `1/J` quantile
/// band, shuffled), so the largest-to-smallest spread is at least
/// `exp(2 · 2 · Φ⁻¹(0.9)) ≈ 169` once `J ≥ 10`. Monthly cases are Poisson
/// around the scale times a multiplicative random-walk drift; deaths are a
/// binomial thinning of cases at a county-specific rate.
pub fn synth_panel(counties: usize, months: usize, seed: u64) -> Result<CountPanel> {
    if counties == 0 || months == 0 {
        return Err(Error::InvalidInput(format!(
            "synthetic panel needs J, T >= 1, got {counties} x {months}"
        )));
    }
    let mut r = rng::root(seed);
    let standard = NormalLaw::new(0.0, 1.0).expect("standard normal");
    let mut bands: Vec<usize> = (0..counties).collect();
    bands.shuffle(&mut r);
    let scales: Vec<f64> = bands
        .iter()
        .map(|&band| {
            let u = (band as f64 + r.random_range(0.05..0.95)) / counties as f64;
            (MEDIAN_SCALE.ln() + LOG_SCALE_SD * standard.inverse_cdf(u)).exp()
        })
        .collect();
    let death_rates: Vec<f64> = (0..counties)
        .map(|_| r.random_range(DEATH_RATE.0..DEATH_RATE.1))
        .collect();

    let county_step = Normal::new(0.0, COUNTY_DRIFT_SD).expect("finite sd");
    let common_step = Normal::new(0.0, COMMON_DRIFT_SD).expect("finite sd");
    let mut level = vec![0.0f64; counties];
    let mut cases = vec![vec![0u64; months]; counties];
    let mut deaths = vec![vec![0u64; months]; counties];
    for t in 0..months {
        let common = if t == 0 { 0.0 } else { common_step.sample(&mut r) };
        for j in 0..counties {
            if t > 0 {
                level[j] += common + county_step.sample(&mut r);
            }
            let mean = scales[j] * level[j].exp();
            let c = Poisson::new(mean.max(1e-9))
                .map_err(|e| Error::InvalidInput(format!("poisson mean {mean}: {e}")))?
                .sample(&mut r) as u64;
            let d = Binomial::new(c, death_rates[j])
                .expect("rate in (0, 1)")
                .sample(&mut r);
            cases[j][t] = c;
            deaths[j][t] = d;
        }
    }
    CountPanel::new(cases, deaths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = synth_panel(12, 5, 4).unwrap();
        let b = synth_panel(12, 5, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_panel(12, 5, 5).unwrap());
        for j in 0..12 {
            for t in 0..5 {
                assert!(a.deaths(j, t) <= a.cases(j, t));
            }
        }
    }

    #[test]
    fn rejects_empty_shape() {
        assert!(synth_panel(0, 3, 1).is_err());
        assert!(synth_panel(3, 0, 1).is_err());
    }
}
