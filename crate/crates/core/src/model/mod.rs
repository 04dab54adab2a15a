//! Clock problem domain: priors, costs, oracle phase structure and scenarios.
//!
//! Frequencies are measured as phase accumulated over one probe, so the
//! probe time is 1 and the reference frequency is 0.

use thiserror::Error;

pub mod config;
pub mod cost;
pub mod prior;
pub mod scenario;

pub use config::{EstimatePlacement, EstimatesSpec, ScenarioConfig, Tolerances};
pub use cost::{golden_section, weighted_median, BayesStatistic, CostModel};
pub use prior::{std_normal_cdf, std_normal_invcdf, std_normal_pdf, PriorSpec, GAUSSIAN_TRUNCATION};
pub use scenario::{cost_operator, initial_oracle_state, oracle_phase_matrix, ClockScenario, DiscretizedPrior};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}
