//! From an SDP solution to a physical protocol: initial querier state,
//! inter-query unitaries and the measurement, plus a simulator that runs
//! the protocol at any frequency.
//!
//! The querier space is `Q ⊗ A`, Dicke level `k` and ancilla index `i`
//! flattened as `k * ancilla_dim + i`. One query multiplies `|k, i⟩` by
//! `exp(i k ω)`, the same sign the SDP uses for `Φ_k`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    herm_eig, inner, norm, orthonormalize_against, schmidt_with_tol, CMatrix, HermitianMatrix, LinalgError, PureState,
    System,
};
use crate::model::DiscretizedPrior;
use crate::program::{query_marginal, InterrogationSolution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("query image of step {step} differs from the next oracle marginal by {residual:e}")]
    EigenbasisMismatch { step: usize, residual: f64 },
    #[error("measured state does not prepare the requested oracle operators (residual {residual:e})")]
    RemotePrepMismatch { residual: f64 },
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// Eigenvalues of a block below this count as zero when purifying.
pub const RANK_TOL: f64 = 1e-14;
/// Oracle eigenvalues below this carry no matched co-vectors.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Largest tolerated gap between the query image and the next oracle marginal.
pub const MARGINAL_TOL: f64 = 1e-6;
/// Eigenvalues of `σ_a` below this are dropped from its pure decomposition.
pub const SIGMA_TOL: f64 = 1e-11;
/// Squared Schmidt coefficients kept when building the measurement.
pub const SCHMIDT_TOL: f64 = 1e-14;
/// Tolerance of the remote-preparation precondition.
pub const REMOTE_PREP_TOL: f64 = 1e-7;

/// Measurement on `Q ⊗ A` in factored form: `P_a = Σ_m |w_am⟩⟨w_am|`, plus
/// the projector onto the complement of all factors, which belongs to
/// `complement_outcome`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Povm {
    pub dim: usize,
    pub factors: Vec<Vec<Vec<Complex<f64>>>>,
    pub complement_outcome: usize,
}

impl Povm {
    pub fn outcomes(&self) -> usize {
        self.factors.len()
    }

    /// `⟨ψ|P_a|ψ⟩` for every outcome.
    pub fn probabilities(&self, psi: &[Complex<f64>]) -> Vec<f64> {
        let mut total = 0.0;
        let mut q: Vec<f64> = self
            .factors
            .iter()
            .map(|fs| {
                let s: f64 = fs.iter().map(|w| inner(w, psi).norm_sqr()).sum();
                total += s;
                s
            })
            .collect();
        let nrm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        q[self.complement_outcome] += (nrm2 - total).max(0.0);
        q
    }

    /// Dense POVM elements.
    pub fn elements(&self) -> Vec<HermitianMatrix<f64>> {
        let n = self.dim;
        let mut sum = CMatrix::zeros(n, n);
        let mut out: Vec<CMatrix<f64>> = self
            .factors
            .iter()
            .map(|fs| {
                let mut p = CMatrix::zeros(n, n);
                for w in fs {
                    p = &p + &CMatrix::outer(w, w);
                }
                sum = &sum + &p;
                p
            })
            .collect();
        let comp = &CMatrix::identity(n) - &sum;
        out[self.complement_outcome] = &out[self.complement_outcome] + &comp;
        out.into_iter().map(HermitianMatrix::from_matrix_unchecked).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructedProtocol {
    pub atoms: usize,
    pub queries: usize,
    pub ancilla_dim: usize,
    /// Initial querier state on `Q ⊗ A`.
    pub psi0: PureState<f64>,
    /// `V_1 … V_{t_f − 1}` on `Q ⊗ A`.
    pub unitaries: Vec<CMatrix<f64>>,
    pub povm: Povm,
    pub estimates: Vec<f64>,
}

impl ReconstructedProtocol {
    pub fn levels(&self) -> usize {
        self.atoms + 1
    }

    pub fn querier_dim(&self) -> usize {
        self.levels() * self.ancilla_dim
    }

    /// Magnitudes `|⟨k|ψ₀⟩|`, marginalized over the ancilla.
    pub fn dicke_amplitudes(&self) -> Vec<f64> {
        let da = self.ancilla_dim;
        let amps = self.psi0.amplitudes();
        (0..self.levels()).map(|k| amps[k * da..(k + 1) * da].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect()
    }

    /// Querier state after all queries at frequency `ω`.
    pub fn final_state(&self, omega: f64) -> Vec<Complex<f64>> {
        let mut psi = self.psi0.amplitudes().to_vec();
        apply_query(&mut psi, omega, self.ancilla_dim);
        for v in &self.unitaries {
            psi = v.mat_vec(&psi);
            apply_query(&mut psi, omega, self.ancilla_dim);
        }
        psi
    }

    /// Outcome distribution `q(a|ω)`.
    pub fn simulate(&self, omega: f64) -> Vec<f64> {
        self.povm.probabilities(&self.final_state(omega))
    }

    /// Expected cost of the protocol on a finite oracle.
    pub fn discrete_cost(&self, dp: &DiscretizedPrior, cost: crate::model::CostModel) -> f64 {
        dp.omegas
            .iter()
            .zip(&dp.weights)
            .map(|(&w, &p)| {
                let q = self.simulate(w);
                p * q.iter().zip(&self.estimates).map(|(qa, &f)| qa * cost.value(w - f)).sum::<f64>()
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProtocolExport::from(self)).expect("protocol serializes")
    }
}

/// Archival form with dense POVM matrices.
#[derive(Serialize, Deserialize)]
pub struct ProtocolExport {
    pub atoms: usize,
    pub queries: usize,
    pub ancilla_dim: usize,
    pub psi0: Vec<[f64; 2]>,
    pub unitaries: Vec<Vec<Vec<[f64; 2]>>>,
    pub povm: Vec<Vec<Vec<[f64; 2]>>>,
    pub estimates: Vec<f64>,
}

fn dense_rows(m: &CMatrix<f64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
}

impl From<&ReconstructedProtocol> for ProtocolExport {
    fn from(p: &ReconstructedProtocol) -> Self {
        Self {
            atoms: p.atoms,
            queries: p.queries,
            ancilla_dim: p.ancilla_dim,
            psi0: p.psi0.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
            unitaries: p.unitaries.iter().map(dense_rows).collect(),
            povm: p.povm.elements().iter().map(|e| dense_rows(e.matrix())).collect(),
            estimates: p.estimates.clone(),
        }
    }
}

fn apply_query(psi: &mut [Complex<f64>], omega: f64, ancilla_dim: usize) {
    for (k, chunk) in psi.chunks_mut(ancilla_dim).enumerate() {
        let ph = Complex::from_polar(1.0, k as f64 * omega);
        for z in chunk {
            *z *= ph;
        }
    }
}

/// Joint oracle–querier state, `amps[x * dim + j]`.
#[derive(Clone, Debug)]
struct Joint {
    d: usize,
    dim: usize,
    amps: Vec<Complex<f64>>,
}

impl Joint {
    fn query(&mut self, omegas: &[f64], ancilla_dim: usize) {
        for (x, row) in self.amps.chunks_mut(self.dim).enumerate() {
            apply_query(row, omegas[x], ancilla_dim);
        }
    }

    fn apply(&mut self, v: &CMatrix<f64>) {
        for row in self.amps.chunks_mut(self.dim) {
            let out = v.mat_vec(row);
            row.copy_from_slice(&out);
        }
    }

    /// `(⟨e|⊗I)|Φ⟩`
    fn covector(&self, e: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut out = vec![Complex::new(0.0, 0.0); self.dim];
        for (x, row) in self.amps.chunks(self.dim).enumerate() {
            let c = e[x].conj();
            for (o, &a) in out.iter_mut().zip(row) {
                *o += c * a;
            }
        }
        out
    }

    fn into_state(self, levels: usize, ancilla_dim: usize) -> Result<PureState<f64>, LinalgError> {
        PureState::normalized(
            vec![System::new("O", self.d), System::new("Q", levels), System::new("A", ancilla_dim)],
            self.amps,
        )
    }
}

/// Blockwise purification `Σ_k Σ_i √λ_ki |v_ki⟩|k⟩|i⟩` of `⊕_k B_k`.
fn purify_blocks(blocks: &[HermitianMatrix<f64>], ancilla_dim: usize) -> Joint {
    let d = blocks[0].dim();
    let dim = blocks.len() * ancilla_dim;
    let mut amps = vec![Complex::new(0.0, 0.0); d * dim];
    for (k, b) in blocks.iter().enumerate() {
        let eig = b.eig();
        for (i, &lam) in eig.values.iter().take(ancilla_dim).enumerate() {
            if lam <= RANK_TOL {
                break;
            }
            let s = lam.sqrt();
            for x in 0..d {
                amps[x * dim + k * ancilla_dim + i] = eig.vectors[(x, i)] * s;
            }
        }
    }
    Joint { d, dim, amps }
}

fn numerical_rank(b: &HermitianMatrix<f64>) -> usize {
    b.eigenvalues().iter().filter(|&&l| l > RANK_TOL).count()
}

/// Orthonormal completion of `family` in `C^dim`, greedily taking the
/// standard basis vector with the largest remainder.
fn complete_basis(family: &mut Vec<Vec<Complex<f64>>>, dim: usize) {
    let mut used = vec![false; dim];
    while family.len() < dim {
        let mut best = None;
        let mut best_norm = 0.0;
        for (j, u) in used.iter().enumerate() {
            if *u {
                continue;
            }
            let rem: f64 = 1.0 - family.iter().map(|f| f[j].norm_sqr()).sum::<f64>();
            if rem > best_norm {
                best_norm = rem;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        used[j] = true;
        let mut e = vec![Complex::new(0.0, 0.0); dim];
        e[j] = Complex::new(1.0, 0.0);
        if let Some(v) = orthonormalize_against(&e, family, 1e-8) {
            family.push(v);
        }
    }
}

/// Initial state, unitaries, and the joint state after the final query.
pub struct UnitaryStage {
    pub psi0: PureState<f64>,
    pub unitaries: Vec<CMatrix<f64>>,
    pub ancilla_dim: usize,
    /// On `O ⊗ Q ⊗ A`.
    pub final_state: PureState<f64>,
}

/// Builds `ψ₀` and the unitaries `V_t` by matching purifications of
/// consecutive oracle marginals in one shared eigenbasis.
pub fn reconstruct_unitaries(sol: &InterrogationSolution) -> Result<UnitaryStage, ReconstructError> {
    let omegas = &sol.prior.omegas;
    let d = omegas.len();
    let tf = sol.blocks.len();
    if tf == 0 || sol.blocks.iter().any(|bs| bs.is_empty() || bs.iter().any(|b| b.dim() != d)) {
        return Err(ReconstructError::Malformed("solution blocks do not match the oracle size".into()));
    }
    let levels = sol.blocks[0].len();
    let ancilla_dim = sol.blocks[1..].iter().flatten().map(numerical_rank).max().unwrap_or(1).max(1);
    let dim = levels * ancilla_dim;

    // t = 0: the oracle is in |p⟩ and the purification factors.
    let ideal0 = purify_blocks(&sol.blocks[0], ancilla_dim);
    let pvec: Vec<Complex<f64>> = sol.prior.weights.iter().map(|&w| Complex::new(w.sqrt(), 0.0)).collect();
    let psi0_amps = ideal0.covector(&pvec);
    let psi0 = PureState::normalized(vec![System::new("Q", levels), System::new("A", ancilla_dim)], psi0_amps)?;
    let mut joint = Joint { d, dim, amps: Vec::with_capacity(d * dim) };
    for p in &pvec {
        joint.amps.extend(psi0.amplitudes().iter().map(|&a| a * p));
    }

    let mut unitaries = Vec::with_capacity(tf.saturating_sub(1));
    for t in 0..tf - 1 {
        let image = query_marginal(&sol.blocks[t], omegas);
        let mut next = CMatrix::zeros(d, d);
        for b in &sol.blocks[t + 1] {
            next = &next + b.matrix();
        }
        let residual = image.matrix().max_abs_diff(&next);
        if residual > MARGINAL_TOL {
            return Err(ReconstructError::EigenbasisMismatch { step: t + 1, residual });
        }
        joint.query(omegas, ancilla_dim);
        let target = purify_blocks(&sol.blocks[t + 1], ancilla_dim);
        let eig = HermitianMatrix::from_matrix_unchecked(next).eig();
        let mut from: Vec<Vec<Complex<f64>>> = Vec::new();
        let mut to: Vec<Vec<Complex<f64>>> = Vec::new();
        for (i, &lam) in eig.values.iter().enumerate() {
            if lam <= SUPPORT_TOL {
                break;
            }
            let e = eig.vector(i);
            let s = 1.0 / lam.sqrt();
            let a: Vec<_> = joint.covector(&e).into_iter().map(|z| z * s).collect();
            let b: Vec<_> = target.covector(&e).into_iter().map(|z| z * s).collect();
            if let (Some(a), Some(b)) = (orthonormalize_against(&a, &from, 1e-3), orthonormalize_against(&b, &to, 1e-3)) {
                from.push(a);
                to.push(b);
            }
        }
        complete_basis(&mut from, dim);
        complete_basis(&mut to, dim);
        // V = Σ_j |to_j⟩⟨from_j|
        let mut v = CMatrix::zeros(dim, dim);
        for (f, g) in from.iter().zip(&to) {
            for r in 0..dim {
                if g[r].norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..dim {
                    v[(r, c)] += g[r] * f[c].conj();
                }
            }
        }
        joint.apply(&v);
        unitaries.push(v);
    }
    joint.query(omegas, ancilla_dim);
    let final_state = joint.into_state(levels, ancilla_dim)?;
    Ok(UnitaryStage { psi0, unitaries, ancilla_dim, final_state })
}

/// Measurement on the querier side of `final_state` (oracle system first)
/// that leaves the oracle in `σ_a` on outcome `a`.
pub fn build_povm(final_state: &PureState<f64>, sigma: &[HermitianMatrix<f64>]) -> Result<Povm, ReconstructError> {
    let systems = final_state.systems();
    if systems.len() < 2 || sigma.is_empty() {
        return Err(ReconstructError::Malformed("need an oracle system, a querier system and at least one outcome".into()));
    }
    let oracle = systems[0].label.clone();
    let d = systems[0].dim;
    let dim: usize = systems[1..].iter().map(|s| s.dim).product();
    if sigma.iter().any(|s| s.dim() != d) {
        return Err(ReconstructError::Malformed("oracle operator dimension mismatch".into()));
    }
    let (rho, _) = final_state.reduced_density(&[oracle.as_str()])?;
    let mut total = CMatrix::zeros(d, d);
    for s in sigma {
        total = &total + s.matrix();
    }
    let residual = total.max_abs_diff(rho.matrix());
    if residual > REMOTE_PREP_TOL {
        return Err(ReconstructError::RemotePrepMismatch { residual });
    }

    let sch = schmidt_with_tol(final_state, &[oracle.as_str()], SCHMIDT_TOL)?;
    let r = sch.coefficients.len();
    // Coefficients of the unnormalized measurement vectors in the ϕ_j basis.
    let mut coeffs: Vec<(usize, Vec<Complex<f64>>)> = Vec::new();
    for (a, s) in sigma.iter().enumerate() {
        let eig = s.eig();
        for (mi, &p) in eig.values.iter().enumerate() {
            if p < SIGMA_TOL {
                break;
            }
            let psi = eig.vector(mi);
            let c: Vec<Complex<f64>> = (0..r)
                .map(|j| (inner(&sch.left[j], &psi) * (p.sqrt() / sch.coefficients[j].sqrt())).conj())
                .collect();
            coeffs.push((a, c));
        }
    }
    // G = Σ c c†, ideally the identity; G^{-1/2} restores exact completeness.
    let mut g = CMatrix::zeros(r, r);
    for (_, c) in &coeffs {
        for i in 0..r {
            for j in 0..r {
                g[(i, j)] += c[i] * c[j].conj();
            }
        }
    }
    let geig = herm_eig(&g.hermitian_part(), 1e-12)?;
    let gmax = geig.values.first().copied().unwrap_or(0.0);
    let mut t = CMatrix::zeros(r, r);
    for (k, &mu) in geig.values.iter().enumerate() {
        if mu <= 1e-12 * gmax.max(1.0) {
            break;
        }
        let v = geig.vector(k);
        let s = 1.0 / mu.sqrt();
        for i in 0..r {
            for j in 0..r {
                t[(i, j)] += v[i] * v[j].conj() * s;
            }
        }
    }
    let mut factors = vec![Vec::new(); sigma.len()];
    for (a, c) in coeffs {
        let tc = t.mat_vec(&c);
        let mut w = vec![Complex::new(0.0, 0.0); dim];
        for (j, coef) in tc.iter().enumerate() {
            for (wv, &phi) in w.iter_mut().zip(&sch.right[j]) {
                *wv += coef * phi;
            }
        }
        if norm(&w) > 0.0 {
            factors[a].push(w);
        }
    }
    Ok(Povm { dim, factors, complement_outcome: 0 })
}

/// Full protocol for an interrogation solution.
pub fn reconstruct(sol: &InterrogationSolution) -> Result<ReconstructedProtocol, ReconstructError> {
    let stage = reconstruct_unitaries(sol)?;
    let povm = build_povm(&stage.final_state, &sol.sigma)?;
    Ok(ReconstructedProtocol {
        atoms: sol.scenario.atoms,
        queries: sol.scenario.queries,
        ancilla_dim: stage.ancilla_dim,
        psi0: stage.psi0,
        unitaries: stage.unitaries,
        povm,
        estimates: sol.scenario.estimates.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// `max_{a,x} |q(a|ω_x) p_x − (σ_a)_xx|`
    pub marginal_residual: f64,
    /// `max |Σ_a P_a − I|`
    pub completeness_residual: f64,
    /// Smallest eigenvalue over all POVM elements.
    pub povm_min_eigenvalue: f64,
    /// Largest `max |V^† V − I|`.
    pub unitarity_residual: f64,
    /// `| |ψ₀|² − 1 |`
    pub norm_residual: f64,
    pub passing: bool,
}

pub const VERIFY_TOL: f64 = 1e-5;

impl VerifyReport {
    /// Worst of two reports, residual by residual.
    pub fn merge(self, other: Self) -> Self {
        Self {
            marginal_residual: self.marginal_residual.max(other.marginal_residual),
            completeness_residual: self.completeness_residual.max(other.completeness_residual),
            povm_min_eigenvalue: self.povm_min_eigenvalue.min(other.povm_min_eigenvalue),
            unitarity_residual: self.unitarity_residual.max(other.unitarity_residual),
            norm_residual: self.norm_residual.max(other.norm_residual),
            passing: self.passing && other.passing,
        }
    }
}

/// Cross-checks a protocol against the solution it came from.
pub fn verify_protocol(protocol: &ReconstructedProtocol, sol: &InterrogationSolution, dp: &DiscretizedPrior) -> VerifyReport {
    let mut marginal_residual: f64 = 0.0;
    for (x, (&w, &p)) in dp.omegas.iter().zip(&dp.weights).enumerate() {
        let q = protocol.simulate(w);
        for (a, s) in sol.sigma.iter().enumerate() {
            let qa = q.get(a).copied().unwrap_or(f64::NAN);
            marginal_residual = marginal_residual.max((qa * p - s[(x, x)].re).abs());
        }
        if q.len() != sol.sigma.len() {
            marginal_residual = f64::INFINITY;
        }
    }
    let elements = protocol.povm.elements();
    let n = protocol.povm.dim;
    let mut sum = CMatrix::zeros(n, n);
    let mut min_eig = f64::INFINITY;
    for e in &elements {
        sum = &sum + e.matrix();
        min_eig = min_eig.min(e.min_eigenvalue());
    }
    let completeness_residual = sum.max_abs_diff(&CMatrix::identity(n));
    let unitarity_residual = protocol.unitaries.iter().map(|v| v.unitarity_residual()).fold(0.0, f64::max);
    let nrm: f64 = protocol.psi0.amplitudes().iter().map(|z| z.norm_sqr()).sum();
    let norm_residual = (nrm - 1.0).abs();
    let passing = marginal_residual <= VERIFY_TOL
        && completeness_residual <= VERIFY_TOL
        && min_eig >= -VERIFY_TOL
        && unitarity_residual <= VERIFY_TOL
        && norm_residual <= VERIFY_TOL;
    VerifyReport {
        marginal_residual,
        completeness_residual,
        povm_min_eigenvalue: min_eig,
        unitarity_residual,
        norm_residual,
        passing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClockScenario, CostModel, PriorSpec};
    use crate::program::solve_interrogation;
    use crate::sdp::SolverOptions;
    use std::f64::consts::FRAC_PI_2;

    fn gaussian_solution(atoms: usize, queries: usize, d: usize, m: usize) -> InterrogationSolution {
        let prior = PriorSpec::gaussian(0.0, 1.0);
        let omegas: Vec<f64> = (0..d).map(|k| prior.invcdf((k as f64 + 0.37) / d as f64).unwrap()).collect();
        let dp = DiscretizedPrior::new(omegas, vec![1.0 / d as f64; d]).unwrap();
        let estimates = (0..m).map(|a| -2.5 + 5.0 * a as f64 / (m - 1) as f64).collect();
        let sc = ClockScenario { atoms, queries, prior, cost: CostModel::Quadratic, d, estimates };
        solve_interrogation(&dp, &sc, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn single_query_protocol_verifies() {
        let sol = gaussian_solution(2, 1, 7, 5);
        let p = reconstruct(&sol).unwrap();
        assert!(p.unitaries.is_empty());
        assert_eq!(p.ancilla_dim, 1);
        let rep = verify_protocol(&p, &sol, &sol.prior);
        assert!(rep.passing, "{rep:?}");
        assert!((p.discrete_cost(&sol.prior, CostModel::Quadratic) - sol.cost).abs() < 1e-5);
    }

    #[test]
    fn two_query_protocol_verifies() {
        let sol = gaussian_solution(1, 2, 7, 5);
        let p = reconstruct(&sol).unwrap();
        assert_eq!(p.unitaries.len(), 1);
        let rep = verify_protocol(&p, &sol, &sol.prior);
        assert!(rep.passing, "{rep:?}");
        assert!(rep.unitarity_residual < 1e-9);
        assert!(rep.completeness_residual < 1e-8);
    }

    #[test]
    fn replacing_a_unitary_is_detected() {
        let sol = gaussian_solution(1, 2, 7, 5);
        let mut p = reconstruct(&sol).unwrap();
        let n = p.querier_dim();
        p.unitaries[0] = CMatrix::identity(n);
        let rep = verify_protocol(&p, &sol, &sol.prior);
        assert!(rep.marginal_residual > 1e-4, "{rep:?}");
        assert!(!rep.passing);
    }

    #[test]
    fn orthogonal_case_is_perfectly_discriminated() {
        let dp = DiscretizedPrior::new(vec![-FRAC_PI_2, FRAC_PI_2], vec![0.5, 0.5]).unwrap();
        let sc = ClockScenario {
            atoms: 1,
            queries: 1,
            prior: PriorSpec::Discrete { points: dp.omegas.clone(), weights: dp.weights.clone() },
            cost: CostModel::Quadratic,
            d: 2,
            estimates: dp.omegas.clone(),
        };
        let sol = solve_interrogation(&dp, &sc, &SolverOptions::default()).unwrap();
        let p = reconstruct(&sol).unwrap();
        assert!((p.simulate(-FRAC_PI_2)[0] - 1.0).abs() < 1e-7);
        assert!((p.simulate(FRAC_PI_2)[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn equal_split_povm_is_uniform() {
        // Pure oracle-querier state with σ_a = ρ^O / m
        let r = 1.0 / 2f64.sqrt();
        let st = PureState::new(
            vec![System::new("O", 2), System::new("Q", 2)],
            vec![Complex::new(r, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(r, 0.0)],
        )
        .unwrap();
        let third = HermitianMatrix::from_real_diag(&[1.0 / 6.0, 1.0 / 6.0]);
        let povm = build_povm(&st, &[third.clone(), third.clone(), third]).unwrap();
        for e in povm.elements() {
            assert!(e.matrix().max_abs_diff(&CMatrix::identity(2).scale(1.0 / 3.0)) < 1e-12);
        }
        let single = build_povm(&st, &[HermitianMatrix::from_real_diag(&[0.5, 0.5])]).unwrap();
        assert!(single.elements()[0].matrix().max_abs_diff(&CMatrix::identity(2)) < 1e-12);
    }

    #[test]
    fn remote_prep_mismatch_detected() {
        let st = PureState::new(vec![System::new("O", 2), System::new("Q", 1)], vec![Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)])
            .unwrap();
        let bad = HermitianMatrix::from_real_diag(&[0.5, 0.5]);
        assert!(matches!(build_povm(&st, &[bad]), Err(ReconstructError::RemotePrepMismatch { .. })));
    }
}
