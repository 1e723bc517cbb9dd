use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms lighter than this are treated as empty when coupling.
pub const MASS_TOL: f64 = 1e-12;

/// A probability mass function on a finite, strictly increasing integer
/// support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePmf {
    support: Vec<i64>,
    mass: Vec<f64>,
}

impl DiscretePmf {
    /// Validates the masses (nonnegative, summing to one within 1e-12) and
    /// rescales them to sum to one exactly in floating point.
    pub fn new(support: Vec<i64>, mass: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Validation("pmf support is empty".into()));
        }
        if support.len() != mass.len() {
            return Err(Error::Validation(format!(
                "support has {} points but {} masses",
                support.len(),
                mass.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("support is not strictly increasing".into()));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Validation("masses must be finite and nonnegative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("masses sum to {total}, not 1")));
        }
        Ok(Self::renormalized(support, mass, total))
    }

    /// Builds a pmf from nonnegative weights with a positive total.
    pub fn from_weights(support: Vec<i64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Validation(format!("weights total {total} is not positive")));
        }
        let mass = weights.iter().map(|w| w / total).collect();
        Self::new(support, mass)
    }

    fn renormalized(support: Vec<i64>, mut mass: Vec<f64>, total: f64) -> Self {
        mass.iter_mut().for_each(|m| *m /= total);
        Self { support, mass }
    }

    pub fn point(x: i64) -> Self {
        Self {
            support: vec![x],
            mass: vec![1.0],
        }
    }

    pub fn uniform(support: Vec<i64>) -> Result<Self> {
        let n = support.len();
        Self::from_weights(support, vec![1.0; n])
    }

    /// Binomial(n, p) shifted by `offset`.
    pub fn binomial(n: u64, p: f64, offset: i64) -> Self {
        let mass = crate::stats::binomial_pmf(n, p);
        let support = (0..=n as i64).map(|k| k + offset).collect();
        let total = mass.iter().sum();
        Self::renormalized(support, mass, total)
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mass_at(&self, x: i64) -> f64 {
        match self.support.binary_search(&x) {
            Ok(i) => self.mass[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.mass)
            .map(|(&x, &m)| x as f64 * m)
            .sum()
    }

    /// Atoms carrying more than [`MASS_TOL`] mass.
    pub fn atoms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.mass.iter().copied())
            .filter(|&(_, m)| m > MASS_TOL)
    }

    /// Total variation distance.
    pub fn total_variation(&self, other: &DiscretePmf) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < self.len() || j < other.len() {
            let a = self.support.get(i).copied().unwrap_or(i64::MAX);
            let b = other.support.get(j).copied().unwrap_or(i64::MAX);
            if a == b {
                sum += (self.mass[i] - other.mass[j]).abs();
                i += 1;
                j += 1;
            } else if a < b {
                sum += self.mass[i];
                i += 1;
            } else {
                sum += other.mass[j];
                j += 1;
            }
        }
        0.5 * sum
    }
}

/// Wasserstein-∞ distance between two pmfs on the integers.
///
/// In one dimension the monotone (quantile) coupling is optimal for every
/// W_p including p = ∞, so the distance is the largest displacement the
/// north-west-corner walk over both cumulative distributions ever makes.
pub fn w_inf_1d(p: &DiscretePmf, q: &DiscretePmf) -> f64 {
    let a: Vec<(i64, f64)> = p.atoms().collect();
    let b: Vec<(i64, f64)> = q.atoms().collect();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut worst = 0i64;
    loop {
        worst = worst.max((a[i].0 - b[j].0).abs());
        let step = ra.min(rb);
        ra -= step;
        rb -= step;
        if ra <= MASS_TOL {
            i += 1;
            if i == a.len() {
                break;
            }
            ra = a[i].1;
        }
        if rb <= MASS_TOL {
            j += 1;
            if j == b.len() {
                break;
            }
            rb = b[j].1;
        }
    }
    worst as f64
}
