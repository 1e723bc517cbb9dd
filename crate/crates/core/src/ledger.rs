//! Budget accounting for releases under public-information-conditioned
//! Pufferfish privacy.

use std::collections::BTreeMap;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_budget(eps: f64) -> Result<()> {
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidBudget(format!("epsilon {eps} is negative or NaN")));
    }
    Ok(())
}

/// Budget of conditionally independent releases on the same data: the sum.
pub fn compose_sequential(eps_list: &[f64]) -> Result<f64> {
    eps_list.iter().try_fold(0.0, |acc, &eps| {
        check_budget(eps)?;
        Ok(acc + eps)
    })
}

/// Budget of releases that each read a disjoint partition of the records.
///
/// The composition result is stated for a common budget; for heterogeneous
/// budgets the maximum is reported.
pub fn compose_parallel(eps_list: &[f64]) -> Result<f64> {
    if eps_list.is_empty() {
        return Err(Error::InvalidInput(
            "parallel composition needs at least one release".into(),
        ));
    }
    eps_list.iter().try_fold(0.0f64, |acc, &eps| {
        check_budget(eps)?;
        Ok(acc.max(eps))
    })
}

/// Level of an `eps`-DP release once it is conditioned on a set-membership
/// public event.
pub fn condition_on_public(eps: f64) -> Result<f64> {
    check_budget(eps)?;
    Ok(2.0 * eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub release_id: String,
    /// Raw mechanism budget, never rescaled in storage.
    pub epsilon: f64,
    /// Opaque partition label; releases with distinct labels are assumed to
    /// read disjoint records.
    pub partition_id: Option<String>,
    pub conditioned: bool,
}

impl LedgerEntry {
    pub fn effective_epsilon(&self) -> f64 {
        if self.conditioned {
            2.0 * self.epsilon
        } else {
            self.epsilon
        }
    }
}

/// Append-only record of releases.
///
/// Unpartitioned entries compose sequentially with everything. Partitioned
/// entries compose sequentially within their label, and the labels compose
/// in parallel.
#[derive(Debug, Default)]
pub struct PrivacyLedger {
    entries: RwLock<Vec<LedgerEntry>>,
}

impl PrivacyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &self,
        release_id: impl Into<String>,
        epsilon: f64,
        partition_id: Option<String>,
        conditioned: bool,
    ) -> Result<()> {
        check_budget(epsilon)?;
        if !epsilon.is_finite() {
            return Err(Error::InvalidBudget(format!("epsilon {epsilon} is not finite")));
        }
        let entry = LedgerEntry {
            release_id: release_id.into(),
            epsilon,
            partition_id,
            conditioned,
        };
        self.entries.write().expect("ledger lock poisoned").push(entry);
        Ok(())
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.entries.read().expect("ledger lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("ledger lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-partition sequential totals, keyed by label.
    pub fn partition_totals(&self) -> BTreeMap<String, f64> {
        let entries = self.entries.read().expect("ledger lock poisoned");
        let mut totals = BTreeMap::new();
        for e in entries.iter() {
            if let Some(label) = &e.partition_id {
                *totals.entry(label.clone()).or_insert(0.0) += e.effective_epsilon();
            }
        }
        totals
    }

    pub fn total(&self) -> f64 {
        let entries = self.entries.read().expect("ledger lock poisoned");
        let mut terms: Vec<f64> = entries
            .iter()
            .filter(|e| e.partition_id.is_none())
            .map(LedgerEntry::effective_epsilon)
            .collect();
        drop(entries);
        let partitions: Vec<f64> = self.partition_totals().into_values().collect();
        if !partitions.is_empty() {
            terms.push(compose_parallel(&partitions).expect("stored budgets are valid"));
        }
        compose_sequential(&terms).expect("stored budgets are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sequential_examples() {
        assert_eq!(compose_sequential(&[1.0, 0.5]).unwrap(), 1.5);
        assert_eq!(compose_sequential(&[0.0]).unwrap(), 0.0);
        assert!((compose_sequential(&[0.01, 0.01, 0.98]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            compose_sequential(&[1.0, -0.1]),
            Err(Error::InvalidBudget(_))
        ));
    }

    #[test]
    fn parallel_examples() {
        assert_eq!(compose_parallel(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(compose_parallel(&[0.5, 1.0]).unwrap(), 1.0);
        assert_eq!(compose_parallel(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(compose_parallel(&[]), Err(Error::InvalidInput(_))));
        assert!(compose_parallel(&[0.3, -1.0]).is_err());
    }

    #[test]
    fn conditioning_doubles() {
        assert_eq!(condition_on_public(0.5).unwrap(), 1.0);
        assert_eq!(condition_on_public(0.0).unwrap(), 0.0);
        assert_eq!(condition_on_public(1.0).unwrap(), 2.0);
        assert!(condition_on_public(-1.0).is_err());
    }

    #[test]
    fn ledger_keeps_raw_budget() {
        let ledger = PrivacyLedger::new();
        ledger.record("a", 0.5, None, true).unwrap();
        assert_eq!(ledger.entries()[0].epsilon, 0.5);
        assert_eq!(ledger.total(), 1.0);
        assert!(ledger.record("b", -0.5, None, false).is_err());
        assert!(ledger.record("b", f64::INFINITY, None, false).is_err());
        assert_eq!(ledger.len(), 1);
    }

    #[test]
    fn ledger_mixes_partitions() {
        let ledger = PrivacyLedger::new();
        ledger.record("global", 0.25, None, false).unwrap();
        ledger.record("p1-a", 0.5, Some("p1".into()), false).unwrap();
        ledger.record("p1-b", 0.25, Some("p1".into()), false).unwrap();
        ledger.record("p2", 0.5, Some("p2".into()), true).unwrap();
        // p1 = 0.75, p2 = 1.0 after conditioning; max = 1.0
        assert_eq!(ledger.total(), 1.25);
    }

    #[test]
    fn ledger_concurrent_appends() {
        let ledger = PrivacyLedger::new();
        std::thread::scope(|s| {
            for i in 0..8 {
                let ledger = &ledger;
                s.spawn(move || {
                    for k in 0..100 {
                        ledger.record(format!("{i}-{k}"), 0.001, None, false).unwrap();
                        let _ = ledger.total();
                    }
                });
            }
        });
        assert_eq!(ledger.len(), 800);
        assert!((ledger.total() - 0.8).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn sequential_commutes(mut v in proptest::collection::vec(0.0f64..10.0, 0..12)) {
            let a = compose_sequential(&v).unwrap();
            v.reverse();
            let b = compose_sequential(&v).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            let (left, right) = v.split_at(v.len() / 2);
            let split = compose_sequential(&[
                compose_sequential(left).unwrap(),
                compose_sequential(right).unwrap(),
            ]).unwrap();
            prop_assert!((a - split).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn parallel_idempotent(x in 0.0f64..10.0, k in 1usize..10) {
            prop_assert_eq!(compose_parallel(&vec![x; k]).unwrap(), x);
        }

        #[test]
        fn ledger_total_matches_composition(
            items in proptest::collection::vec((0.0f64..2.0, proptest::option::of(0u8..3), any::<bool>()), 1..20)
        ) {
            let ledger = PrivacyLedger::new();
            for (i, (eps, part, cond)) in items.iter().enumerate() {
                ledger.record(i.to_string(), *eps, part.map(|p| p.to_string()), *cond).unwrap();
            }
            let mut seq: Vec<f64> = items.iter()
                .filter(|(_, p, _)| p.is_none())
                .map(|(e, _, c)| if *c { 2.0 * e } else { *e })
                .collect();
            let mut per = BTreeMap::<u8, Vec<f64>>::new();
            for (e, p, c) in &items {
                if let Some(p) = p {
                    per.entry(*p).or_default().push(if *c { 2.0 * e } else { *e });
                }
            }
            if !per.is_empty() {
                let parts: Vec<f64> = per.values().map(|v| compose_sequential(v).unwrap()).collect();
                seq.push(compose_parallel(&parts).unwrap());
            }
            let expected = compose_sequential(&seq).unwrap();
            prop_assert!((ledger.total() - expected).abs() <= 1e-9);
            prop_assert!(ledger.total().is_finite());
        }
    }
}
