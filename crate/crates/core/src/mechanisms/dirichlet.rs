use crate::error::{Error, Result};
use crate::stats::ln_gamma;

/// Dirichlet-Multinomial law of `J` counts summing to a fixed total.
#[derive(Debug, Clone)]
pub struct DirichletMultinomial {
    alphas: Vec<f64>,
    total: u64,
    log_norm: f64,
}

impl DirichletMultinomial {
    pub fn new(alphas: Vec<f64>, total: u64) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidInput("need at least one concentration".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "concentrations must be positive and finite, got {a}"
            )));
        }
        let a_sum: f64 = alphas.iter().sum();
        let s = total as f64;
        let log_norm = ln_gamma(a_sum) + ln_gamma(s + 1.0) - ln_gamma(s + a_sum)
            - alphas.iter().map(|&a| ln_gamma(a)).sum::<f64>();
        Ok(Self {
            alphas,
            total,
            log_norm,
        })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Per-coordinate factor `ln Γ(y + α_j) − ln Γ(y + 1)`; the log mass is
    /// the normalizer plus the sum of these.
    pub fn coordinate_term(&self, county: usize, y: i64) -> f64 {
        if y < 0 {
            return f64::NEG_INFINITY;
        }
        let y = y as f64;
        ln_gamma(y + self.alphas[county]) - ln_gamma(y + 1.0)
    }

    pub fn log_pmf(&self, y: &[u64]) -> Result<f64> {
        if y.len() != self.alphas.len() {
            return Err(Error::InvalidInput(format!(
                "{} counts for {} concentrations",
                y.len(),
                self.alphas.len()
            )));
        }
        let sum: u64 = y.iter().sum();
        if sum != self.total {
            return Err(Error::Validation(format!(
                "counts sum to {sum}, expected {}",
                self.total
            )));
        }
        Ok(self.log_norm
            + y.iter()
                .enumerate()
                .map(|(j, &v)| self.coordinate_term(j, v as i64))
                .sum::<f64>())
    }
}

/// Dirichlet-Multinomial log mass of `y` with total `total`.
pub fn dm_log_pmf(y: &[u64], total: u64, alphas: &[f64]) -> Result<f64> {
    DirichletMultinomial::new(alphas.to_vec(), total)?.log_pmf(y)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// All vectors of `parts` nonnegative integers summing to `total`.
    pub(crate) fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
        if parts == 1 {
            return vec![vec![total]];
        }
        let mut out = Vec::new();
        for first in 0..=total {
            for mut rest in compositions(total - first, parts - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    #[test]
    fn beta_binomial_uniform() {
        for y in [[0, 2], [1, 1], [2, 0]] {
            let p = dm_log_pmf(&y, 2, &[1.0, 1.0]).unwrap().exp();
            assert!((p - 1.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn sums_to_one() {
        let comps = compositions(4, 3);
        assert_eq!(comps.len(), 15);
        let total: f64 = comps
            .iter()
            .map(|y| dm_log_pmf(y, 4, &[1.0, 2.0, 3.0]).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_concentration_approaches_multinomial() {
        let q = [0.2, 0.3, 0.5];
        let alphas: Vec<f64> = q.iter().map(|p| p * 1e7).collect();
        let y = [1u64, 1, 2];
        let dm = dm_log_pmf(&y, 4, &alphas).unwrap().exp();
        let multinomial = 12.0 * 0.2 * 0.3 * 0.25;
        assert!((dm - multinomial).abs() < 1e-5, "{dm} vs {multinomial}");
    }

    #[test]
    fn large_counts_are_finite() {
        let y = [400_000u64, 600_000];
        let v = dm_log_pmf(&y, 1_000_000, &[2.0, 3.0]).unwrap();
        assert!(v.is_finite() && v < 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            dm_log_pmf(&[1, 1], 3, &[1.0, 1.0]),
            Err(Error::Validation(_))
        ));
        assert!(dm_log_pmf(&[1, 1], 2, &[1.0, 0.0]).is_err());
        assert!(dm_log_pmf(&[1, 1], 2, &[1.0]).is_err());
    }
}
