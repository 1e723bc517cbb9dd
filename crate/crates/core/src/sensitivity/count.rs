use serde::{Deserialize, Serialize};

use super::pmf::{w_inf_1d, DiscretePmf};
use crate::error::{Error, Result};

pub const DEFAULT_GRID_STEPS: usize = 101;

/// Public information bounding how strongly one binary record's secret
/// drags the remaining `n - 1` records: under `X_i = 1` each other record is
/// one with probability at most `z1`, under `X_i = 0` at least `z0`.
///
/// The family is parameterized as i.i.d. Bernoulli records, so the count
/// given the secret is `1 + Bin(n - 1, p1)` with `p1 <= z1`, or
/// `Bin(n - 1, p0)` with `p0 >= z0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountBoundFamily {
    pub n: u64,
    pub z0: f64,
    pub z1: f64,
}

impl CountBoundFamily {
    pub fn new(n: u64, z0: f64, z1: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("need n >= 2 records, got {n}")));
        }
        for (name, z) in [("z0", z0), ("z1", z1)] {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::Validation(format!("{name} = {z} outside [0, 1]")));
            }
        }
        Ok(Self { n, z0, z1 })
    }

    /// Count law given `X_i = 1` with the other records Bernoulli(`p1`).
    pub fn law_given_one(&self, p1: f64) -> DiscretePmf {
        DiscretePmf::binomial(self.n - 1, p1, 1)
    }

    /// Count law given `X_i = 0` with the other records Bernoulli(`p0`).
    pub fn law_given_zero(&self, p0: f64) -> DiscretePmf {
        DiscretePmf::binomial(self.n - 1, p0, 0)
    }
}

/// Grid-search supremum of the conditional W∞ distance, with the maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaZ {
    pub delta_z: u64,
    pub p1: f64,
    pub p0: f64,
}

fn grid(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
    let last = (steps - 1) as f64;
    (0..steps).map(move |k| {
        if k + 1 == steps {
            hi
        } else {
            lo + (hi - lo) * k as f64 / last
        }
    })
}

/// Public-information sensitivity of a binary count: the largest W∞
/// between the two secret-conditioned count laws over the family, searched
/// on a `grid_steps × grid_steps` grid of `(p1, p0) ∈ [0, z1] × [z0, 1]`.
pub fn delta_z_count(family: &CountBoundFamily, grid_steps: usize) -> Result<DeltaZ> {
    if grid_steps < 2 {
        return Err(Error::InvalidInput(format!(
            "grid needs at least 2 steps, got {grid_steps}"
        )));
    }
    let zero_laws: Vec<(f64, DiscretePmf)> = grid(family.z0, 1.0, grid_steps)
        .map(|p0| (p0, family.law_given_zero(p0)))
        .collect();
    let mut best = DeltaZ {
        delta_z: 0,
        p1: 0.0,
        p0: family.z0,
    };
    for p1 in grid(0.0, family.z1, grid_steps) {
        let one = family.law_given_one(p1);
        for (p0, zero) in &zero_laws {
            let w = w_inf_1d(&one, zero) as u64;
            if w > best.delta_z {
                best = DeltaZ {
                    delta_z: w,
                    p1,
                    p0: *p0,
                };
            }
        }
    }
    Ok(best)
}

/// Constraints a released `(S_n, n - S_n)` pair must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdlConstraints {
    pub k_anonymity: Option<u64>,
    /// `(t, t_star)`: L1 t-closeness to the public proportion `t_star`.
    pub t_closeness: Option<(f64, f64)>,
}

/// Whether an observed count is consistent with the requested disclosure
/// limitation constraints. Secret pairs whose databases fail the check fall
/// outside the guarantee.
pub fn filter_secret_pairs_sdl(n: u64, constraints: &SdlConstraints, s_n: u64) -> Result<bool> {
    if s_n > n {
        return Err(Error::InvalidInput(format!("count {s_n} exceeds n = {n}")));
    }
    let mut ok = true;
    if let Some(k) = constraints.k_anonymity {
        if k == 0 {
            return Err(Error::InvalidInput("k-anonymity needs k >= 1".into()));
        }
        if 2 * k > n {
            return Err(Error::Infeasible(format!(
                "{k}-anonymity cannot hold for n = {n}"
            )));
        }
        ok &= (k..=n - k).contains(&s_n);
    }
    if let Some((t, t_star)) = constraints.t_closeness {
        if !(t >= 0.0) || !(0.0..=1.0).contains(&t_star) {
            return Err(Error::InvalidInput(format!(
                "t-closeness needs t >= 0 and t* in [0, 1], got ({t}, {t_star})"
            )));
        }
        ok &= (s_n as f64 / n as f64 - t_star).abs() <= t + 1e-12;
    }
    Ok(ok)
}
