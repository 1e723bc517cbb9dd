use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DELTA_Z: f64 = 2.0;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Release strategy for each county-month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Additive discrete Laplace noise, then congenial projection.
    Postprocess,
    /// Exponential mechanism on the integer lattice.
    WassersteinNaive,
    /// Exponential mechanism restricted to the congenial set.
    WassersteinCongenial,
    /// Exponential mechanism on the congenial set with a Dirichlet-Multinomial
    /// base measure centered on the previous month.
    WassersteinPrior,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Postprocess,
        Strategy::WassersteinNaive,
        Strategy::WassersteinCongenial,
        Strategy::WassersteinPrior,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Postprocess => "postprocess",
            Strategy::WassersteinNaive => "wasserstein-naive",
            Strategy::WassersteinCongenial => "wasserstein-congenial",
            Strategy::WassersteinPrior => "wasserstein-prior",
        }
    }

    pub fn is_congenial(&self) -> bool {
        !matches!(self, Strategy::WassersteinNaive)
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown strategy {s:?}")))
    }
}

/// Parameters of the synthetic panel generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub counties: usize,
    pub months: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputSpec {
    Csv(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: Strategy,
    pub epsilon: f64,
    #[serde(default = "default_delta_z")]
    pub delta_z: f64,
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
    pub input: InputSpec,
}

fn default_delta_z() -> f64 {
    DEFAULT_DELTA_Z
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidBudget(format!("epsilon {} must be positive and finite", self.epsilon)));
        }
        if !(self.delta_z > 0.0) || !self.delta_z.is_finite() {
            return Err(Error::Validation(format!("delta_z {} must be positive", self.delta_z)));
        }
        if self.replicates == 0 {
            return Err(Error::Validation("replicates must be at least 1".into()));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Validation(format!("alpha {} must be positive", self.alpha)));
        }
        if let InputSpec::Synthetic(s) = &self.input {
            if s.counties == 0 || s.months == 0 {
                return Err(Error::Validation("synthetic panel needs J, T >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_json_str(
            r#"{"strategy": "wasserstein-prior", "epsilon": 0.5, "replicates": 3, "seed": 1,
                "input": {"synthetic": {"counties": 4, "months": 3, "seed": 2}}}"#,
        )
        .unwrap();
        assert_eq!(c.strategy, Strategy::WassersteinPrior);
        assert_eq!(c.delta_z, 2.0);
        assert_eq!(c.alpha, 1.0);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        let base = r#""strategy": "postprocess", "seed": 1, "input": {"csv": "x.csv"}"#;
        for extra in [
            r#""epsilon": 0, "replicates": 1"#,
            r#""epsilon": 1, "replicates": 0"#,
            r#""epsilon": 1, "replicates": 1, "alpha": -1"#,
            r#""epsilon": 1, "replicates": 1, "bogus": 1"#,
        ] {
            assert!(ExperimentConfig::from_json_str(&format!("{{{base}, {extra}}}")).is_err(), "{extra}");
        }
        assert!("nope".parse::<Strategy>().is_err());
        assert_eq!("postprocess".parse::<Strategy>().unwrap(), Strategy::Postprocess);
    }
}
