//! JSON scenario schema.
//!
//! ```json
//! {
//!   "atoms": 2,
//!   "queries": 1,
//!   "prior": {"kind": "gaussian", "params": {"mean": 0.0, "std": 1.0}},
//!   "cost": "quadratic",
//!   "d": 15,
//!   "estimates": {"count": 25, "method": "optimal_width"},
//!   "seed": 1,
//!   "samples": 100,
//!   "tolerances": {"gap_tol": 1e-8, "feas_tol": 1e-9, "max_iter": 200}
//! }
//! ```
//!
//! `estimates` is either an explicit list or `{count, method}` with method
//! `optimal_width` (equispaced, width minimizing the querier gap) or
//! `quantile` (equal-probability placement). `d` may be omitted for a
//! discrete prior, whose own points are used.

use serde::{Deserialize, Serialize};

use super::{ClockScenario, CostModel, ModelError, PriorSpec};
use crate::sdp::SolverOptions;

pub type Tolerances = SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatePlacement {
    OptimalWidth,
    Quantile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimatesSpec {
    List(Vec<f64>),
    Auto { count: usize, method: EstimatePlacement },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub atoms: usize,
    pub queries: usize,
    pub prior: PriorSpec,
    pub cost: CostModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub estimates: EstimatesSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_samples() -> usize {
    100
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Invalid(format!("config: {e}")))
    }

    /// Resolves the estimate set and validates the result.
    pub fn to_scenario(&self) -> Result<ClockScenario, ModelError> {
        self.prior.validate()?;
        let d = match (&self.prior, self.d) {
            (PriorSpec::Discrete { points, .. }, None) => points.len(),
            (PriorSpec::Discrete { points, .. }, Some(d)) if d != points.len() => {
                return Err(ModelError::Invalid(format!("d = {d} but the discrete prior has {} points", points.len())))
            }
            (_, Some(d)) => d,
            (_, None) => return Err(ModelError::Invalid("`d` is required for a continuous prior".into())),
        };
        let estimates = match &self.estimates {
            EstimatesSpec::List(f) => {
                let mut f = f.clone();
                f.sort_by(|a, b| a.total_cmp(b));
                f
            }
            EstimatesSpec::Auto { count, method } => {
                if *count < 2 {
                    return Err(ModelError::Invalid("estimate count must be at least 2".into()));
                }
                if !self.prior.is_continuous() {
                    return Err(ModelError::Domain("automatic estimate placement needs a continuous prior".into()));
                }
                match method {
                    EstimatePlacement::OptimalWidth => crate::bounds::choose_estimates(&self.prior, self.cost, *count)?,
                    EstimatePlacement::Quantile => crate::bounds::quantile_estimates(&self.prior, *count)?,
                }
            }
        };
        let sc = ClockScenario { atoms: self.atoms, queries: self.queries, prior: self.prior.clone(), cost: self.cost, d, estimates };
        sc.validate()?;
        if self.tolerances.gap_tol <= 0.0 || self.tolerances.feas_tol <= 0.0 || self.tolerances.max_iter == 0 {
            return Err(ModelError::Invalid("tolerances must be positive".into()));
        }
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"{
          "atoms": 2, "queries": 1,
          "prior": {"kind": "gaussian", "params": {"mean": 0.0, "std": 1.0}},
          "cost": "quadratic", "d": 15,
          "estimates": {"count": 25, "method": "optimal_width"},
          "seed": 1, "samples": 100,
          "tolerances": {"gap_tol": 1e-8, "feas_tol": 1e-9, "max_iter": 200}
        }"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let sc = cfg.to_scenario().unwrap();
        assert_eq!(sc.estimates.len(), 25);
        assert_eq!(sc.levels(), 3);
    }

    #[test]
    fn explicit_list_and_discrete_prior() {
        let text = r#"{"atoms": 1, "queries": 1,
          "prior": {"kind": "discrete", "params": {"points": [-1.5707963267948966, 1.5707963267948966], "weights": [0.5, 0.5]}},
          "cost": "quadratic", "estimates": [1.5707963267948966, -1.5707963267948966]}"#;
        let sc = ScenarioConfig::from_json(text).unwrap().to_scenario().unwrap();
        assert_eq!(sc.d, 2);
        assert!(sc.estimates[0] < 0.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"atoms": 1, "queries": 1, "prior": {"kind": "gaussian", "params": {"mean": 0, "std": 1}},
          "cost": "quadratic", "d": 5, "estimates": [0, 1], "bogus": 3}"#;
        assert!(ScenarioConfig::from_json(text).is_err());
    }

    #[test]
    fn missing_d_for_continuous_prior() {
        let text = r#"{"atoms": 1, "queries": 1, "prior": {"kind": "uniform", "params": {"lo": 0, "hi": 1}},
          "cost": "absolute", "estimates": [0.25, 0.75]}"#;
        assert!(ScenarioConfig::from_json(text).unwrap().to_scenario().is_err());
    }
}
