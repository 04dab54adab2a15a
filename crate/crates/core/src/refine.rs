//! Posterior-statistic refinement of the estimate set, and classical
//! chaining of interrogations with Bayes updates on a fixed grid.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClockScenario, DiscretizedPrior, ModelError, PriorSpec};
use crate::program::{posteriors, solve_interrogation, InterrogationSolution, ProgramError};
use crate::sdp::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("discretized cost rose from {before} to {after} at iteration {iteration}")]
    NonDecreasingCost { iteration: usize, before: f64, after: f64 },
}

/// Outcomes with less probability keep their previous estimate. Interior
/// point solutions leave ~1e-9 on unused outcomes, whose posteriors are
/// then noise.
pub const ACTIVE_OUTCOME_TOL: f64 = 1e-6;
/// Allowed cost increase between refinement iterations before it is an error.
pub const MONOTONE_SLACK: f64 = 1e-6;
/// Estimates closer than this are merged.
const MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Refined {
    pub estimates: Vec<f64>,
    pub solution: InterrogationSolution,
    /// Solves performed.
    pub iterations: usize,
    /// Discretized cost after each solve.
    pub costs: Vec<f64>,
}

/// Sorted copy with near-duplicates merged.
fn tidy(mut f: Vec<f64>) -> Vec<f64> {
    f.sort_by(|a, b| a.total_cmp(b));
    f.dedup_by(|b, a| (*b - *a).abs() < MERGE_TOL);
    f
}

/// Replaces each active estimate with its posterior's Bayes statistic and
/// re-solves until every active estimate moves by less than `tol`.
pub fn refine_estimates(
    dp: &DiscretizedPrior,
    scenario: &ClockScenario,
    max_iter: usize,
    tol: f64,
    opts: &SolverOptions,
) -> Result<Refined, RefineError> {
    let mut sc = scenario.with_estimates(tidy(scenario.estimates.clone()));
    let mut costs = Vec::new();
    let mut sol = solve_interrogation(dp, &sc, opts)?;
    costs.push(sol.cost);
    for it in 1..=max_iter.max(1) {
        let post = posteriors(&sol);
        let mut next = sc.estimates.clone();
        let mut shift: f64 = 0.0;
        for (a, f) in next.iter_mut().enumerate() {
            if post.outcome_probs[a] < ACTIVE_OUTCOME_TOL {
                continue;
            }
            let stat = sc.cost.optimal_estimate(&dp.omegas, &post.posterior[a]);
            shift = shift.max((stat - *f).abs());
            *f = stat;
        }
        debug!("refinement {it}: cost {:.10} shift {shift:.3e}", sol.cost);
        if shift < tol || it == max_iter {
            return Ok(Refined { estimates: sc.estimates.clone(), solution: sol, iterations: it, costs });
        }
        sc = sc.with_estimates(tidy(next));
        let before = sol.cost;
        sol = solve_interrogation(dp, &sc, opts)?;
        costs.push(sol.cost);
        if sol.cost > before + MONOTONE_SLACK {
            return Err(RefineError::NonDecreasingCost { iteration: it, before, after: sol.cost });
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Refines `scenario.estimates` on the midpoint discretization `o = 1/(2d)`
/// of its continuous prior.
pub fn refine_on_midpoint(
    scenario: &ClockScenario,
    max_iter: usize,
    tol: f64,
    opts: &SolverOptions,
) -> Result<Refined, RefineError> {
    let dp = crate::bounds::discretize_prior(&scenario.prior, scenario.d, 0.5 / scenario.d as f64)?;
    refine_estimates(&dp, scenario, max_iter, tol, opts)
}

/// Branches less likely than this are not expanded.
pub const PRUNE_TOL: f64 = 1e-9;
/// Posterior weights below this are dropped from the next stage's grid.
pub const POSTERIOR_FLOOR: f64 = 1e-15;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainNode {
    pub stage: usize,
    /// Outcomes leading here, one per earlier stage.
    pub path: Vec<usize>,
    pub prior: DiscretizedPrior,
    pub solution: InterrogationSolution,
    /// Probability of reaching this node.
    pub probability: f64,
    pub children: Vec<ChainNode>,
}

impl ChainNode {
    /// `Σ_leaf p(path) · cost(leaf)`, where a leaf's cost is conditional on
    /// reaching it.
    pub fn expected_cost(&self) -> f64 {
        if self.children.is_empty() {
            self.probability * self.solution.cost
        } else {
            self.children.iter().map(ChainNode::expected_cost).sum::<f64>() + self.pruned_cost()
        }
    }

    /// Pruned outcomes are charged this node's own final cost share.
    fn pruned_cost(&self) -> f64 {
        let post = posteriors(&self.solution);
        let child: Vec<usize> = self.children.iter().map(|c| *c.path.last().expect("child path")).collect();
        let sc = &self.solution.scenario;
        (0..post.outcome_probs.len())
            .filter(|a| !child.contains(a))
            .map(|a| {
                let diag = self.solution.sigma[a].matrix().diag_real();
                self.probability
                    * diag.iter().zip(&self.prior.omegas).map(|(v, &w)| v * sc.cost.value(w - sc.estimates[a])).sum::<f64>()
            })
            .sum()
    }

    pub fn leaves(&self) -> usize {
        if self.children.is_empty() {
            1
        } else {
            self.children.iter().map(ChainNode::leaves).sum()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub total_cost: f64,
    pub root: ChainNode,
    /// Probability mass of outcomes that were not expanded.
    pub pruned_mass: f64,
}

/// Posterior of outcome `a` restricted to its support.
fn posterior_prior(sol: &InterrogationSolution, a: usize) -> Result<DiscretizedPrior, ModelError> {
    let diag = sol.sigma[a].matrix().diag_real();
    let keep: Vec<usize> = (0..diag.len()).filter(|&x| diag[x] > POSTERIOR_FLOOR).collect();
    let total: f64 = keep.iter().map(|&x| diag[x]).sum();
    DiscretizedPrior::new(keep.iter().map(|&x| sol.prior.omegas[x]).collect(), keep.iter().map(|&x| diag[x] / total).collect())
}

fn expand(
    stage: usize,
    path: Vec<usize>,
    prior: DiscretizedPrior,
    probability: f64,
    scenario: &ClockScenario,
    stages: usize,
    opts: &SolverOptions,
) -> Result<(ChainNode, f64), RefineError> {
    let sc = if stage == 0 {
        scenario.clone()
    } else {
        let grid = PriorSpec::Discrete { points: prior.omegas.clone(), weights: prior.weights.clone() };
        ClockScenario { d: prior.len(), prior: grid, ..scenario.clone() }
    };
    let solution = solve_interrogation(&prior, &sc, opts)?;
    if stage + 1 == stages {
        return Ok((ChainNode { stage, path, prior, solution, probability, children: Vec::new() }, 0.0));
    }
    let post = posteriors(&solution);
    let (live, pruned): (Vec<usize>, Vec<usize>) =
        (0..post.outcome_probs.len()).partition(|&a| probability * post.outcome_probs[a] >= PRUNE_TOL);
    let pruned_mass: f64 = pruned.iter().map(|&a| probability * post.outcome_probs[a].max(0.0)).sum();
    if pruned_mass > 0.0 {
        debug!("stage {stage} path {path:?}: pruned mass {pruned_mass:.3e}");
    }
    let children = live
        .par_iter()
        .map(|&a| {
            let mut p = path.clone();
            p.push(a);
            expand(stage + 1, p, posterior_prior(&solution, a)?, probability * post.outcome_probs[a], scenario, stages, opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let child_pruned: f64 = children.iter().map(|c| c.1).sum();
    let children = children.into_iter().map(|c| c.0).collect();
    Ok((ChainNode { stage, path, prior, solution, probability, children }, pruned_mass + child_pruned))
}

/// Runs `stages` interrogations of `scenario` in sequence, each on the
/// posterior of the previous outcome over the same grid.
pub fn classical_chain(
    dp: &DiscretizedPrior,
    scenario: &ClockScenario,
    stages: usize,
    opts: &SolverOptions,
) -> Result<ChainResult, RefineError> {
    if stages == 0 {
        return Err(ModelError::Invalid("need at least one stage".into()).into());
    }
    let (root, pruned_mass) = expand(0, Vec::new(), dp.clone(), 1.0, scenario, stages, opts)?;
    let total_cost = root.expected_cost();
    info!("chain: {stages} stages, {} leaves, cost {total_cost:.6}, pruned mass {pruned_mass:.3e}", root.leaves());
    Ok(ChainResult { total_cost, root, pruned_mass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CostModel;
    use std::f64::consts::FRAC_PI_2;

    fn gaussian(atoms: usize, queries: usize, d: usize, m: usize) -> (DiscretizedPrior, ClockScenario) {
        let prior = PriorSpec::gaussian(0.0, 1.0);
        let omegas: Vec<f64> = (0..d).map(|k| prior.invcdf((k as f64 + 0.5) / d as f64).unwrap()).collect();
        let dp = DiscretizedPrior::new(omegas, vec![1.0 / d as f64; d]).unwrap();
        let estimates = (0..m).map(|a| -2.5 + 5.0 * a as f64 / (m - 1) as f64).collect();
        (dp, ClockScenario { atoms, queries, prior, cost: CostModel::Quadratic, d, estimates })
    }

    #[test]
    fn refinement_is_monotone_and_symmetric() {
        let (dp, sc) = gaussian(2, 1, 9, 11);
        let r = refine_estimates(&dp, &sc, 50, 1e-6, &SolverOptions::default()).unwrap();
        for w in r.costs.windows(2) {
            assert!(w[1] <= w[0] + 1e-7, "{:?}", r.costs);
        }
        let f = &r.estimates;
        let n = f.len();
        for i in 0..n {
            assert!((f[i] + f[n - 1 - i]).abs() < 1e-4, "{f:?}");
        }
        assert!(r.costs.last().unwrap() < &r.costs[0]);
    }

    #[test]
    fn converged_input_is_a_fixed_point() {
        let (dp, sc) = gaussian(1, 1, 7, 7);
        let opts = SolverOptions::default();
        let r = refine_estimates(&dp, &sc, 50, 1e-6, &opts).unwrap();
        let again = refine_estimates(&dp, &sc.with_estimates(r.estimates.clone()), 50, 1e-5, &opts).unwrap();
        assert_eq!(again.iterations, 1);
        assert_eq!(again.estimates, r.estimates);
    }

    #[test]
    fn single_stage_chain_is_a_plain_solve() {
        let (dp, sc) = gaussian(2, 1, 7, 5);
        let opts = SolverOptions::default();
        let chain = classical_chain(&dp, &sc, 1, &opts).unwrap();
        let sol = solve_interrogation(&dp, &sc, &opts).unwrap();
        assert_eq!(chain.total_cost, sol.cost);
        assert_eq!(chain.root.leaves(), 1);
    }

    #[test]
    fn chaining_helps_but_less_than_coherence() {
        let (dp, sc) = gaussian(1, 1, 7, 7);
        let opts = SolverOptions::default();
        let one = solve_interrogation(&dp, &sc, &opts).unwrap().cost;
        let chain = classical_chain(&dp, &sc, 2, &opts).unwrap();
        let coherent = solve_interrogation(&dp, &ClockScenario { queries: 2, ..sc.clone() }, &opts).unwrap().cost;
        assert!(chain.total_cost <= one + 1e-6);
        assert!(coherent <= chain.total_cost + 1e-6, "{coherent} vs {}", chain.total_cost);
        for c in &chain.root.children {
            assert!((c.prior.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let mass: f64 = chain.root.children.iter().map(|c| c.probability).sum::<f64>() + chain.pruned_mass;
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn perfect_first_stage_ends_the_chain() {
        let dp = DiscretizedPrior::new(vec![-FRAC_PI_2, FRAC_PI_2], vec![0.5, 0.5]).unwrap();
        let sc = ClockScenario {
            atoms: 1,
            queries: 1,
            prior: PriorSpec::Discrete { points: dp.omegas.clone(), weights: dp.weights.clone() },
            cost: CostModel::Quadratic,
            d: 2,
            estimates: dp.omegas.clone(),
        };
        let chain = classical_chain(&dp, &sc, 2, &SolverOptions::default()).unwrap();
        assert!(chain.total_cost.abs() < 1e-7);
        for c in &chain.root.children {
            assert!(c.solution.cost.abs() < 1e-7);
        }
    }
}
