//! Fixed experiment pipelines behind the command line presets.
//!
//! Every pipeline starts from a Gaussian prior and a quadratic or periodic
//! cost; the offsets come from [`crate::bounds::offsets`] so runs are
//! reproducible from `(k, seed)`.

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{bounds_report, choose_estimates, discretize_prior, offsets, BoundsError, BoundsReport};
use crate::model::{ClockScenario, CostModel, ModelError, PriorSpec};
use crate::program::{solve_interrogation, ProgramError};
use crate::reconstruct::{reconstruct, verify_protocol, ReconstructError, VerifyReport};
use crate::refine::{classical_chain, refine_on_midpoint, RefineError};
use crate::sdp::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// Refinement budget used by the table and comparison pipelines.
pub const REFINE_MAX_ITER: usize = 50;
pub const REFINE_TOL: f64 = 1e-6;

/// Gaussian prior `N(0, σ²)` with `m` estimates from
/// [`choose_estimates`].
pub fn gaussian_scenario(
    sigma: f64,
    atoms: usize,
    queries: usize,
    cost: CostModel,
    d: usize,
    m: usize,
) -> Result<ClockScenario, ModelError> {
    let prior = PriorSpec::gaussian(0.0, sigma);
    prior.validate()?;
    let estimates = choose_estimates(&prior, cost, m)?;
    let sc = ClockScenario { atoms, queries, prior, cost, d, estimates };
    sc.validate()?;
    Ok(sc)
}

/// One row of the atoms/queries table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRow {
    pub atoms: usize,
    pub queries: usize,
    /// Refined estimate set the bounds were computed with.
    pub estimates: Vec<f64>,
    pub refine_iterations: usize,
    /// Midpoint-discretization cost after each refinement solve.
    pub refine_costs: Vec<f64>,
    pub report: BoundsReport,
}

/// `m` optimal-width estimates refined on the midpoint discretization,
/// then bounds over `k` offsets with the refined set.
#[allow(clippy::too_many_arguments)]
pub fn table_row(
    sigma: f64,
    atoms: usize,
    queries: usize,
    d: usize,
    m: usize,
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<TableRow, ExperimentError> {
    let sc = gaussian_scenario(sigma, atoms, queries, CostModel::Quadratic, d, m)?;
    let refined = refine_on_midpoint(&sc, REFINE_MAX_ITER, REFINE_TOL, opts)?;
    let sc = sc.with_estimates(refined.estimates.clone());
    let report = bounds_report(&sc, k, seed, opts)?;
    info!("row N={atoms} t={queries}: c_l {:.4} c_u {:.4}", report.c_l, report.c_u);
    Ok(TableRow {
        atoms,
        queries,
        estimates: refined.estimates,
        refine_iterations: refined.iterations,
        refine_costs: refined.costs,
        report,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InitialState {
    pub sigma: f64,
    pub cost: f64,
    /// `|⟨k|ψ₀⟩|` for Dicke levels `k = 0..=N`.
    pub amplitudes: Vec<f64>,
    pub verify: VerifyReport,
}

/// Optimal one-query input state for the periodic cost on the midpoint
/// discretization, no estimate refinement.
pub fn initial_state(
    sigma: f64,
    atoms: usize,
    d: usize,
    m: usize,
    opts: &SolverOptions,
) -> Result<InitialState, ExperimentError> {
    let sc = gaussian_scenario(sigma, atoms, 1, CostModel::Periodic, d, m)?;
    let dp = discretize_prior(&sc.prior, d, 0.5 / d as f64)?;
    let sol = solve_interrogation(&dp, &sc, opts)?;
    let p = reconstruct(&sol)?;
    let verify = verify_protocol(&p, &sol, &dp);
    Ok(InitialState { sigma, cost: sol.cost, amplitudes: p.dicke_amplitudes(), verify })
}

/// Per-offset costs of one query, two classically chained queries and two
/// coherent queries, all with the same estimate set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryComparison {
    pub sigma: f64,
    pub atoms: usize,
    pub d: usize,
    pub estimates: Vec<f64>,
    pub offsets: Vec<f64>,
    pub single: Vec<f64>,
    pub chained: Vec<f64>,
    pub coherent: Vec<f64>,
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl QueryComparison {
    pub fn means(&self) -> [(f64, f64); 3] {
        [mean_stderr(&self.single), mean_stderr(&self.chained), mean_stderr(&self.coherent)]
    }

    /// Paired differences `single − chained` and `chained − coherent`,
    /// each as (mean, standard error).
    pub fn gaps(&self) -> [(f64, f64); 2] {
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
        [mean_stderr(&diff(&self.single, &self.chained)), mean_stderr(&diff(&self.chained, &self.coherent))]
    }
}

/// Compares `scenario.queries` coherent queries with as many classically
/// chained single queries and with one query. The estimate set is refined
/// for the coherent problem and then shared, so each step of the ordering
/// can only help.
pub fn query_comparison(
    scenario: &ClockScenario,
    k: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<QueryComparison, ExperimentError> {
    if scenario.queries < 2 {
        return Err(ModelError::Invalid("comparison needs at least two queries".into()).into());
    }
    let d = scenario.d;
    let refined = refine_on_midpoint(scenario, REFINE_MAX_ITER, REFINE_TOL, opts)?;
    let coherent_sc = scenario.with_estimates(refined.estimates.clone());
    let single_sc = ClockScenario { queries: 1, ..coherent_sc.clone() };
    let offs = offsets(d, k, seed);
    let rows = offs
        .par_iter()
        .map(|&o| {
            let dp = discretize_prior(&coherent_sc.prior, d, o)?;
            let single = solve_interrogation(&dp, &single_sc, opts)?.cost;
            let chained = classical_chain(&dp, &single_sc, coherent_sc.queries, opts)?.total_cost;
            let coherent = solve_interrogation(&dp, &coherent_sc, opts)?.cost;
            Ok((single, chained, coherent))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(QueryComparison {
        sigma: scenario.prior.std(),
        atoms: scenario.atoms,
        d,
        estimates: refined.estimates,
        offsets: offs,
        single: rows.iter().map(|r| r.0).collect(),
        chained: rows.iter().map(|r| r.1).collect(),
        coherent: rows.iter().map(|r| r.2).collect(),
    })
}
