//! Run configuration: a scenario plus the per-command parameters.
//!
//! ```json
//! {
//!   "scenario": { ... scenario schema ... },
//!   "offset": "midpoint",
//!   "stages": 2,
//!   "refine": {"max_iter": 50, "tol": 1e-6}
//! }
//! ```
//!
//! `offset` is `"midpoint"` (`1/(2d)`) or a number in `(0, 1/d)`; it is
//! ignored for discrete priors. `refine`, when present, refines the
//! estimates on the midpoint discretization before `solve`, `bounds` and
//! `chain`, and sets the budget of `refine`. `compare: true` makes `chain`
//! also compare one query, the chain, and `stages` coherent queries over
//! `samples` offsets.

use chronos_core::model::{EstimatesSpec, ScenarioConfig};
use chronos_core::ClockScenario;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetName {
    Midpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OffsetSpec {
    Named(OffsetName),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineParams {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "midpoint")]
    pub offset: OffsetSpec,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<RefineParams>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub compare: bool,
}

fn midpoint() -> OffsetSpec {
    OffsetSpec::Named(OffsetName::Midpoint)
}

fn default_stages() -> usize {
    2
}

/// Command line values that take precedence over the config file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub d: Option<usize>,
    pub gap_tol: Option<f64>,
}

/// A validated run: the echo config (estimates and `d` written out, all
/// overrides applied) and the scenario it describes.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub scenario: ClockScenario,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn resolve(mut self, ov: &Overrides) -> Result<Resolved, CliError> {
        if let Some(d) = ov.d {
            self.scenario.d = Some(d);
        }
        if let Some(seed) = ov.seed {
            self.scenario.seed = seed;
        }
        if let Some(k) = ov.k {
            self.scenario.samples = k;
        }
        if let Some(tol) = ov.gap_tol {
            self.scenario.tolerances.gap_tol = tol;
        }
        let scenario = self.scenario.to_scenario()?;
        self.scenario.d = Some(scenario.d);
        self.scenario.estimates = EstimatesSpec::List(scenario.estimates.clone());
        if self.stages == 0 {
            return Err(CliError::Config("stages must be at least 1".into()));
        }
        if let Some(r) = self.refine {
            if r.max_iter == 0 || !(r.tol > 0.0) {
                return Err(CliError::Config("refine needs max_iter >= 1 and tol > 0".into()));
            }
        }
        if let OffsetSpec::Value(o) = self.offset {
            let step = 1.0 / scenario.d as f64;
            if scenario.prior.is_continuous() && !(o > 0.0 && o < step) {
                return Err(CliError::Config(format!("offset {o} outside (0, 1/{})", scenario.d)));
            }
        }
        Ok(Resolved { config: self, scenario })
    }
}

impl Resolved {
    pub fn offset(&self) -> f64 {
        match self.config.offset {
            OffsetSpec::Named(OffsetName::Midpoint) => 0.5 / self.scenario.d as f64,
            OffsetSpec::Value(o) => o,
        }
    }

    pub fn refine_params(&self) -> RefineParams {
        self.config.refine.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"scenario": {"atoms": 1, "queries": 1,
        "prior": {"kind": "gaussian", "params": {"mean": 0.0, "std": 1.0}},
        "cost": "quadratic", "d": 5, "estimates": {"count": 4, "method": "optimal_width"}}"#;

    #[test]
    fn defaults_and_echo() {
        let cfg = RunConfig::from_json(&format!("{BASE}}}")).unwrap();
        assert_eq!(cfg.offset, OffsetSpec::Named(OffsetName::Midpoint));
        assert_eq!(cfg.stages, 2);
        let r = cfg.resolve(&Overrides { k: Some(7), ..Default::default() }).unwrap();
        assert_eq!(r.config.scenario.samples, 7);
        assert!(matches!(r.config.scenario.estimates, EstimatesSpec::List(ref f) if f.len() == 4));
        assert!((r.offset() - 0.1).abs() < 1e-15);
        // the echo resolves to itself
        let again = RunConfig::from_json(&serde_json::to_string(&r.config).unwrap()).unwrap();
        assert_eq!(again.resolve(&Overrides::default()).unwrap().config, r.config);
    }

    #[test]
    fn numeric_offset_and_refine_block() {
        let cfg = RunConfig::from_json(&format!(r#"{BASE}, "offset": 0.05, "refine": {{"tol": 1e-4}}}}"#)).unwrap();
        assert_eq!(cfg.offset, OffsetSpec::Value(0.05));
        assert_eq!(cfg.refine.unwrap().max_iter, 50);
        let bad = RunConfig::from_json(&format!(r#"{BASE}, "offset": 0.5}}"#)).unwrap();
        assert!(matches!(bad.resolve(&Overrides::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(&format!(r#"{BASE}, "stagez": 2}}"#)).is_err());
        assert!(RunConfig::from_json(&format!(r#"{BASE}, "refine": {{"iters": 3}}}}"#)).is_err());
    }
}
