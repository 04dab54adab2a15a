//! The clock SDP on Dicke-diagonal blocks.
//!
//! Variables are `B_k^(t)` (oracle operator paired with Dicke level `k`
//! before query `t + 1`) and the conditional oracle operators `σ_a`. A
//! query multiplies block `k` entrywise by `Φ_k`, and the final query is
//! folded into the measurement constraint.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::collections::BTreeMap;

use crate::linalg::{herm_eig, CMatrix, HermitianMatrix, LinalgError};
use crate::model::{cost_operator, initial_oracle_state, oracle_phase_matrix, ClockScenario, DiscretizedPrior, ModelError};
use crate::sdp::{residuals, solve, BlockSdpProblem, HermEntry, SdpError, SolveStatus, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("solver stopped with {status:?} after {iterations} iterations (gap {gap:e}, infeasibility {feas:e})")]
    NotOptimal { status: SolveStatus, iterations: usize, gap: f64, feas: f64 },
}

/// Block index of `B_k^(t)`.
pub fn b_block(levels: usize, t: usize, k: usize) -> usize {
    t * levels + k
}

/// Block index of `σ_a` (0-based outcome).
pub fn sigma_block(levels: usize, queries: usize, a: usize) -> usize {
    queries * levels + a
}

/// Real equality rows for `Σ_terms φ ∘ X_block = rhs` as Hermitian matrices:
/// one row per real part on and above the diagonal, one per imaginary part above it.
fn push_entrywise_equation(
    p: &mut BlockSdpProblem<f64>,
    d: usize,
    terms: &[(usize, Option<&CMatrix<f64>>, f64)],
    rhs: Option<&HermitianMatrix<f64>>,
) {
    for x in 0..d {
        for y in x..d {
            let target = rhs.map(|r| r[(x, y)]).unwrap_or_default();
            let phase = |ph: Option<&CMatrix<f64>>| ph.map(|m| m[(x, y)]).unwrap_or(Complex::new(1.0, 0.0));
            if x == y {
                let row = terms.iter().map(|&(b, _, s)| HermEntry::new(b, x, x, Complex::new(s, 0.0))).collect();
                p.add_constraint(row, target.re);
                continue;
            }
            // Re(φ X_xy) = tr(A X) with A_xy = conj(φ)/2
            let re_row = terms
                .iter()
                .map(|&(b, ph, s)| HermEntry::new(b, x, y, phase(ph).conj() * (0.5 * s)))
                .collect();
            p.add_constraint(re_row, target.re);
            // Im(φ X_xy) = Re(−iφ X_xy)
            let im_row = terms
                .iter()
                .map(|&(b, ph, s)| HermEntry::new(b, x, y, (Complex::new(0.0, -1.0) * phase(ph)).conj() * (0.5 * s)))
                .collect();
            p.add_constraint(im_row, target.im);
        }
    }
}

/// Assembles the clock SDP for one discretization.
pub fn build_clock_sdp(dp: &DiscretizedPrior, scenario: &ClockScenario) -> Result<BlockSdpProblem<f64>, ProgramError> {
    scenario.validate()?;
    dp.validate()?;
    let d = dp.len();
    if d != scenario.d {
        return Err(ProgramError::DimensionMismatch(format!("{d} oracle points but scenario d = {}", scenario.d)));
    }
    let levels = scenario.levels();
    let tf = scenario.queries;
    let m = scenario.estimates.len();
    let mut p = BlockSdpProblem::new();
    for t in 0..tf {
        for k in 0..levels {
            p.add_block(format!("B_{k}^{t}"), d);
        }
    }
    for a in 0..m {
        p.add_block(format!("sigma_{a}"), d);
    }
    let phases: Vec<_> = (0..levels).map(|k| oracle_phase_matrix(&dp.omegas, k)).collect();

    let rho0 = initial_oracle_state(&dp.weights)?;
    let t0: Vec<_> = (0..levels).map(|k| (b_block(levels, 0, k), None, 1.0)).collect();
    push_entrywise_equation(&mut p, d, &t0, Some(&rho0));

    for t in 1..tf {
        let mut terms: Vec<_> = (0..levels).map(|k| (b_block(levels, t, k), None, 1.0)).collect();
        terms.extend((0..levels).map(|k| (b_block(levels, t - 1, k), Some(&phases[k]), -1.0)));
        push_entrywise_equation(&mut p, d, &terms, None);
    }

    let mut terms: Vec<_> = (0..m).map(|a| (sigma_block(levels, tf, a), None, 1.0)).collect();
    terms.extend((0..levels).map(|k| (b_block(levels, tf - 1, k), Some(&phases[k]), -1.0)));
    push_entrywise_equation(&mut p, d, &terms, None);

    for (a, &f) in scenario.estimates.iter().enumerate() {
        p.add_objective_matrix(sigma_block(levels, tf, a), &cost_operator(&dp.omegas, f, scenario.cost));
    }
    Ok(p)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterrogationSolution {
    /// `blocks[t][k] = B_k^(t)`
    pub blocks: Vec<Vec<HermitianMatrix<f64>>>,
    pub sigma: Vec<HermitianMatrix<f64>>,
    pub cost: f64,
    pub gap: f64,
    pub feas: f64,
    pub iterations: usize,
    pub scenario: ClockScenario,
    pub prior: DiscretizedPrior,
}

impl InterrogationSolution {
    /// `ρ^O` after the final query: `Σ_k Φ_k ∘ B_k^(t_f − 1)`.
    pub fn final_oracle_state(&self) -> HermitianMatrix<f64> {
        query_marginal(&self.blocks[self.blocks.len() - 1], &self.prior.omegas)
    }
}

/// `Σ_k Φ_k ∘ B_k`
pub fn query_marginal(blocks: &[HermitianMatrix<f64>], omegas: &[f64]) -> HermitianMatrix<f64> {
    let d = omegas.len();
    let mut acc = CMatrix::zeros(d, d);
    for (k, b) in blocks.iter().enumerate() {
        acc = &acc + &b.matrix().hadamard(&oracle_phase_matrix(omegas, k));
    }
    HermitianMatrix::from_matrix_unchecked(acc)
}

/// The clock SDP restricted to the range of the oracle marginals.
///
/// After `t` queries every block is supported on
/// `K_t = span{u_s : s = 0..=tN}`, `u_s(x) = √p_x exp(i s ω_x)`, so the
/// full-dimensional problem has no strictly feasible point. Blocks here are
/// coordinates `Y` with `B = W_t Y W_t†` for an orthonormal `W_t`, and a
/// query maps `Y` to `T_k Y T_k†` with `T_k = W_t† D_k W_{t−1}`,
/// `D_k = diag(exp(i k ω_x))`.
#[derive(Clone, Debug)]
pub struct ReducedClockSdp {
    pub problem: BlockSdpProblem<f64>,
    /// `bases[t]` for `t = 0..=t_f`; the last one carries the `σ_a`.
    pub bases: Vec<CMatrix<f64>>,
}

/// Directions of the reachable span carrying less than this fraction of the
/// Gram matrix's largest eigenvalue are dropped. Closely spaced `ω_x` make
/// the `u_s` nearly dependent, and keeping those directions leaves every
/// feasible point with forced near-zero eigenvalues.
pub const RANGE_TOL: f64 = 1e-12;

/// Orthonormal `W_t` spanning the numerical range of `Σ_{s ≤ tN} u_s u_s†`.
fn range_basis(dp: &DiscretizedPrior, atoms: usize, t: usize) -> Result<CMatrix<f64>, ProgramError> {
    let d = dp.len();
    let u = CMatrix::from_fn(d, t * atoms + 1, |x, s| Complex::from_polar(dp.weights[x].sqrt(), s as f64 * dp.omegas[x]));
    let eig = herm_eig(&u.matmul(&u.adjoint()).hermitian_part(), 1e-12)?;
    let cut = RANGE_TOL * eig.values[0];
    let r = eig.values.iter().filter(|&&l| l > cut).count();
    Ok(CMatrix::from_fn(d, r, |x, j| eig.vectors[(x, j)]))
}

/// Rows for `Σ_terms sign · T Y_block T† = rhs` over an `n × n` Hermitian
/// output, `T = None` meaning the identity.
fn push_congruence_equation(
    p: &mut BlockSdpProblem<f64>,
    n: usize,
    terms: &[(usize, Option<&CMatrix<f64>>, f64)],
    rhs: Option<&CMatrix<f64>>,
) {
    let one = Complex::new(1.0, 0.0);
    let mi = Complex::new(0.0, -1.0);
    for x in 0..n {
        for y in x..n {
            let target = rhs.map(|r| r[(x, y)]).unwrap_or_default();
            let parts: &[(Complex<f64>, f64)] = if x == y { &[(one, target.re)] } else { &[(one, target.re), (mi, target.im)] };
            for &(rot, value) in parts {
                // Re(rot · Σ φ_ss' Y_ss'), φ_ss' = T_xs conj(T_ys'), folded onto s ≤ s'
                let mut acc: BTreeMap<(usize, usize, usize), Complex<f64>> = BTreeMap::new();
                for &(b, t, sign) in terms {
                    let Some(t) = t else {
                        let v = if x == y { Complex::new((rot * sign).re, 0.0) } else { (rot * sign).conj() * 0.5 };
                        *acc.entry((b, x, y)).or_default() += v;
                        continue;
                    };
                    let r = t.cols();
                    for s in 0..r {
                        let ts = t[(x, s)];
                        if ts == Complex::new(0.0, 0.0) {
                            continue;
                        }
                        for sp in 0..r {
                            let tsp = t[(y, sp)];
                            if tsp == Complex::new(0.0, 0.0) {
                                continue;
                            }
                            let phi = rot * ts * tsp.conj() * sign;
                            if s == sp {
                                *acc.entry((b, s, s)).or_default() += Complex::new(phi.re, 0.0);
                            } else if s < sp {
                                *acc.entry((b, s, sp)).or_default() += phi.conj() * 0.5;
                            } else {
                                *acc.entry((b, sp, s)).or_default() += phi * 0.5;
                            }
                        }
                    }
                }
                let row = acc
                    .into_iter()
                    .filter(|(_, v)| v.norm() > 1e-15)
                    .map(|((b, r, c), v)| HermEntry::new(b, r, c, v))
                    .collect();
                p.add_constraint(row, value);
            }
        }
    }
}

/// Assembles the range-restricted clock SDP.
pub fn build_reduced_clock_sdp(dp: &DiscretizedPrior, scenario: &ClockScenario) -> Result<ReducedClockSdp, ProgramError> {
    scenario.validate()?;
    dp.validate()?;
    let d = dp.len();
    if d != scenario.d {
        return Err(ProgramError::DimensionMismatch(format!("{d} oracle points but scenario d = {}", scenario.d)));
    }
    let levels = scenario.levels();
    let tf = scenario.queries;
    let bases = (0..=tf).map(|t| range_basis(dp, scenario.atoms, t)).collect::<Result<Vec<_>, _>>()?;
    let mut p = BlockSdpProblem::new();
    for (t, w) in bases.iter().enumerate().take(tf) {
        for k in 0..levels {
            p.add_block(format!("B_{k}^{t}"), w.cols());
        }
    }
    for a in 0..scenario.estimates.len() {
        p.add_block(format!("sigma_{a}"), bases[tf].cols());
    }

    p.add_constraint((0..levels).map(|k| HermEntry::new(b_block(levels, 0, k), 0, 0, Complex::new(1.0, 0.0))).collect(), 1.0);

    for t in 1..=tf {
        let (prev, next) = (&bases[t - 1], &bases[t]);
        // Φ_k ∘ (W Y W†) = D_k W Y W† D_k†, and D_k W_{t−1} lies in the range of W_t
        let maps: Vec<CMatrix<f64>> = (0..levels)
            .map(|k| {
                let dk = CMatrix::from_fn(d, prev.cols(), |x, s| Complex::from_polar(1.0, k as f64 * dp.omegas[x]) * prev[(x, s)]);
                next.adjoint().matmul(&dk)
            })
            .collect();
        let mut terms: Vec<(usize, Option<&CMatrix<f64>>, f64)> = if t < tf {
            (0..levels).map(|k| (b_block(levels, t, k), None, 1.0)).collect()
        } else {
            (0..scenario.estimates.len()).map(|a| (sigma_block(levels, tf, a), None, 1.0)).collect()
        };
        terms.extend((0..levels).map(|k| (b_block(levels, t - 1, k), Some(&maps[k]), -1.0)));
        push_congruence_equation(&mut p, next.cols(), &terms, None);
    }

    let w = &bases[tf];
    for (a, &f) in scenario.estimates.iter().enumerate() {
        let cost = cost_operator(&dp.omegas, f, scenario.cost);
        let reduced = w.adjoint().matmul(cost.matrix()).matmul(w).hermitian_part();
        p.add_objective_matrix(sigma_block(levels, tf, a), &HermitianMatrix::from_matrix_unchecked(reduced));
    }
    Ok(ReducedClockSdp { problem: p, bases })
}

/// `W Y W†`
fn lift(w: &CMatrix<f64>, y: &HermitianMatrix<f64>) -> HermitianMatrix<f64> {
    HermitianMatrix::from_matrix_unchecked(w.matmul(y.matrix()).matmul(&w.adjoint()).hermitian_part())
}

/// Solves the clock SDP; any status other than `Optimal` is an error.
///
/// The solve runs on [`build_reduced_clock_sdp`]; the lifted blocks are
/// then checked against the full problem of [`build_clock_sdp`], whose
/// residuals are the ones reported.
pub fn solve_interrogation(
    dp: &DiscretizedPrior,
    scenario: &ClockScenario,
    opts: &SolverOptions,
) -> Result<InterrogationSolution, ProgramError> {
    let reduced = build_reduced_clock_sdp(dp, scenario)?;
    let sol = solve(&reduced.problem, opts)?;
    let levels = scenario.levels();
    let tf = scenario.queries;
    let mut x = sol.x.iter();
    let blocks: Vec<Vec<_>> =
        (0..tf).map(|t| x.by_ref().take(levels).map(|y| lift(&reduced.bases[t], y)).collect()).collect();
    let sigma: Vec<_> = x.map(|y| lift(&reduced.bases[tf], y)).collect();

    let gap = residuals(&reduced.problem, &sol)?.duality_gap;
    let full = build_clock_sdp(dp, scenario)?;
    let lifted: Vec<HermitianMatrix<f64>> = blocks.iter().flatten().chain(&sigma).cloned().collect();
    let feas = full
        .constraint_values(&lifted)
        .iter()
        .zip(&full.constraints)
        .fold(0.0f64, |m, (&v, c)| m.max((v - c.rhs).abs()));
    if sol.status != SolveStatus::Optimal {
        return Err(ProgramError::NotOptimal {
            status: sol.status,
            iterations: sol.iterations,
            gap,
            feas,
        });
    }
    Ok(InterrogationSolution {
        blocks,
        sigma,
        cost: full.objective_value(&lifted),
        gap,
        feas,
        iterations: sol.iterations,
        scenario: scenario.clone(),
        prior: dp.clone(),
    })
}

/// Outcome probabilities and posteriors over the oracle points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Posteriors {
    /// `tr(σ_a)`
    pub outcome_probs: Vec<f64>,
    /// `posterior[a][x] = (σ_a)_xx / tr(σ_a)`; all zeros for unused outcomes.
    pub posterior: Vec<Vec<f64>>,
    /// False where `tr(σ_a) < 1e-12`.
    pub used: Vec<bool>,
}

pub const UNUSED_OUTCOME_TOL: f64 = 1e-12;

pub fn posteriors(sol: &InterrogationSolution) -> Posteriors {
    posteriors_of(&sol.sigma)
}

pub fn posteriors_of(sigma: &[HermitianMatrix<f64>]) -> Posteriors {
    let mut outcome_probs = Vec::with_capacity(sigma.len());
    let mut posterior = Vec::with_capacity(sigma.len());
    let mut used = Vec::with_capacity(sigma.len());
    for s in sigma {
        let diag: Vec<f64> = s.matrix().diag_real().into_iter().map(|v| v.max(0.0)).collect();
        let tr: f64 = diag.iter().sum();
        outcome_probs.push(s.trace());
        if tr < UNUSED_OUTCOME_TOL {
            posterior.push(vec![0.0; diag.len()]);
            used.push(false);
        } else {
            posterior.push(diag.iter().map(|v| v / tr).collect());
            used.push(true);
        }
    }
    Posteriors { outcome_probs, posterior, used }
}

/// `Σ_a Σ_x C(ω_x − f_a) (σ_a)_xx`
pub fn discretized_cost(sol: &InterrogationSolution) -> f64 {
    let sc = &sol.scenario;
    sol.sigma
        .iter()
        .zip(&sc.estimates)
        .map(|(s, &f)| {
            s.matrix().diag_real().iter().zip(&sol.prior.omegas).map(|(v, &w)| v * sc.cost.value(w - f)).sum::<f64>()
        })
        .sum()
}
