//! Hermitian matrices, pure states on labeled product spaces, and the
//! operations protocol reconstruction is built from: eigendecomposition,
//! purification, Schmidt decomposition and partial trace.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cmatrix::{inner, norm, CMatrix};
use super::rmatrix::RMatrix;
use crate::num::{czero, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (residual {residual:e} > {tol:e})")]
    NotHermitian { residual: f64, tol: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("trace {trace} differs from 1")]
    BadTrace { trace: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownSystem(String),
    #[error("invalid bipartition: {0}")]
    InvalidPartition(String),
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Default threshold below which eigenvalues count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Clamps an `f64` tolerance so it stays meaningful at the precision of `T`.
pub(crate) fn tol_for<T: Real>(tol: f64) -> T {
    T::lit(tol).max(T::epsilon() * T::lit(256.0))
}

/// Square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HermitianMatrix<T>(CMatrix<T>);

impl<T: Real> HermitianMatrix<T> {
    /// Checks symmetry within `tol` and stores the exact Hermitian part.
    pub fn new(m: CMatrix<T>, tol: T) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(LinalgError::DimensionMismatch(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let residual = m.hermiticity_residual();
        if residual > tol {
            return Err(LinalgError::NotHermitian { residual: residual.to_f64_lossy(), tol: tol.to_f64_lossy() });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wraps a matrix already known to be Hermitian, symmetrizing it exactly.
    pub fn from_matrix_unchecked(m: CMatrix<T>) -> Self {
        debug_assert!(m.is_square());
        Self(m.hermitian_part())
    }

    pub fn from_real_diag(diag: &[T]) -> Self {
        Self(CMatrix::from_real_diag(diag))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    /// `|v><v|`
    pub fn projector(v: &[Complex<T>]) -> Self {
        Self(CMatrix::outer(v, v))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.0
    }

    pub fn trace(&self) -> T {
        self.0.trace().re
    }

    /// `tr(self * other)` for Hermitian arguments (real up to rounding).
    pub fn trace_product(&self, other: &Self) -> T {
        let n = self.dim();
        assert_eq!(n, other.dim(), "trace_product shape");
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let p = self.0[(i, j)] * other.0[(j, i)];
                acc += p.re;
            }
        }
        acc
    }

    pub fn eig(&self) -> HermEig<T> {
        jacobi(&self.0).expect("Jacobi sweeps on a Hermitian matrix")
    }

    /// Eigenvalues only, descending. Goes through the real embedding and a
    /// tridiagonal QL sweep, which is much cheaper than Jacobi for large dims.
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.dim();
        let emb = RMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = self.0[(i % n, j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (false, true) => z.im,
                (true, false) => -z.im,
            }
        });
        // Every eigenvalue of the embedding appears twice.
        let ev = emb.sym_eigenvalues();
        ev.into_iter().rev().step_by(2).collect()
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> T {
        *self.eigenvalues().last().expect("non-empty matrix")
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn scale(&self, s: T) -> Self {
        Self(self.0.scale(s))
    }
}

impl<T> std::ops::Index<(usize, usize)> for HermitianMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, idx: (usize, usize)) -> &Complex<T> {
        &self.0[idx]
    }
}

/// Eigendecomposition `H = Σ_i λ_i v_i v_i^†`, eigenvalues descending,
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermEig<T> {
    pub values: Vec<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermEig<T> {
    pub fn vector(&self, i: usize) -> Vec<Complex<T>> {
        self.vectors.column(i)
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        let n = self.vectors.rows();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            for i in 0..n {
                let vi = self.vectors[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Fails with `NotHermitian` when the symmetry residual exceeds `tol`.
pub fn herm_eig<T: Real>(h: &CMatrix<T>, tol: T) -> Result<HermEig<T>> {
    let h = HermitianMatrix::new(h.clone(), tol)?;
    jacobi(h.matrix())
}

const MAX_SWEEPS: usize = 100;

fn jacobi<T: Real>(h: &CMatrix<T>) -> Result<HermEig<T>> {
    let n = h.rows();
    let mut a = h.hermitian_part();
    let mut v = CMatrix::<T>::identity(n);
    let scale = a.frobenius_norm();
    if n == 1 || scale == T::zero() {
        return Ok(sorted(a.diag_real(), v));
    }
    let eps = T::epsilon();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= eps * scale {
            converged = true;
            break;
        }
        // Fixed cyclic order keeps the rotation sequence, and hence the
        // eigenvectors of degenerate eigenspaces, reproducible.
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q, eps * scale);
            }
        }
    }
    if !converged {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() > T::lit(1e3) * eps * scale {
            return Err(LinalgError::NoConvergence { sweeps: MAX_SWEEPS });
        }
    }
    Ok(sorted(a.diag_real(), v))
}

fn rotate<T: Real>(a: &mut CMatrix<T>, v: &mut CMatrix<T>, p: usize, q: usize, floor: T) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r <= floor * T::lit(1e-3) {
        a[(p, q)] = czero();
        a[(q, p)] = czero();
        return;
    }
    let n = a.rows();
    // Phase making the pivot real, then a real Jacobi rotation.
    let phase = apq / r; // e^{i phi}
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (T::lit(2.0) * r);
    let t = {
        let s = if theta >= T::zero() { T::one() } else { -T::one() };
        s / (theta.abs() + (theta * theta + T::one()).sqrt())
    };
    let cs = T::one() / (t * t + T::one()).sqrt();
    let sn = t * cs;
    let ph_conj = phase.conj(); // e^{-i phi}
    // G = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] acting on columns p, q.
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * cs - akq * ph_conj * sn;
        a[(k, q)] = akp * sn + akq * ph_conj * cs;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * cs - aqk * phase * sn;
        a[(q, k)] = apk * sn + aqk * phase * cs;
    }
    a[(p, q)] = czero();
    a[(q, p)] = czero();
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * cs - vkq * ph_conj * sn;
        v[(k, q)] = vkp * sn + vkq * ph_conj * cs;
    }
}

fn sorted<T: Real>(values: Vec<T>, v: CMatrix<T>) -> HermEig<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable sort: ties keep the rotation-sequence order.
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.rows();
    let vectors = CMatrix::from_fn(n, order.len(), |i, j| v[(i, order[j])]);
    HermEig { values: order.iter().map(|&i| values[i]).collect(), vectors }
}

/// Labeled tensor factor of a product space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct System {
    pub label: String,
    pub dim: usize,
}

impl System {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Self { label: label.into(), dim }
    }
}

/// Unit vector on an ordered product of labeled systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState<T> {
    systems: Vec<System>,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> PureState<T> {
    /// Validates dimensions and unit norm (within 1e-10).
    pub fn new(systems: Vec<System>, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let total: usize = systems.iter().map(|s| s.dim).product();
        if systems.is_empty() || total != amplitudes.len() {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} amplitudes for total dimension {}",
                amplitudes.len(),
                total
            )));
        }
        check_labels(&systems)?;
        let n2 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<T>();
        if (n2 - T::one()).abs() > tol_for::<T>(1e-10) {
            return Err(LinalgError::NotNormalized { norm_sqr: n2.to_f64_lossy() });
        }
        Ok(Self { systems, amplitudes })
    }

    /// Normalizes the amplitudes before validating.
    pub fn normalized(systems: Vec<System>, mut amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let nrm = norm(&amplitudes);
        if nrm == T::zero() {
            return Err(LinalgError::NotNormalized { norm_sqr: 0.0 });
        }
        for a in &mut amplitudes {
            *a /= nrm;
        }
        Self::new(systems, amplitudes)
    }

    pub fn systems(&self) -> &[System] {
        &self.systems
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Reduced density matrix on `keep` (in the state's system order).
    pub fn reduced_density(&self, keep: &[&str]) -> Result<(HermitianMatrix<T>, Vec<System>)> {
        let split = Bipartition::new(&self.systems, keep)?;
        let m = split.coefficient_matrix(&self.amplitudes);
        let (l, r) = (m.rows(), m.cols());
        let mut rho = CMatrix::zeros(l, l);
        for a in 0..l {
            for b in a..l {
                let mut acc = czero();
                for t in 0..r {
                    acc += m[(a, t)] * m[(b, t)].conj();
                }
                rho[(a, b)] = acc;
                rho[(b, a)] = acc.conj();
            }
        }
        Ok((HermitianMatrix::from_matrix_unchecked(rho), split.left_systems))
    }

    /// `|Φ><Φ|`
    pub fn density(&self) -> HermitianMatrix<T> {
        HermitianMatrix::projector(&self.amplitudes)
    }
}

fn check_labels(systems: &[System]) -> Result<()> {
    for (i, s) in systems.iter().enumerate() {
        if s.dim == 0 {
            return Err(LinalgError::DimensionMismatch(format!("system `{}` has dimension 0", s.label)));
        }
        if systems[..i].iter().any(|o| o.label == s.label) {
            return Err(LinalgError::InvalidPartition(format!("duplicate label `{}`", s.label)));
        }
    }
    Ok(())
}

/// Index bookkeeping for splitting a product space into two groups of factors.
struct Bipartition {
    left_systems: Vec<System>,
    right_systems: Vec<System>,
    left_offsets: Vec<usize>,
    right_offsets: Vec<usize>,
}

impl Bipartition {
    fn new(systems: &[System], left: &[&str]) -> Result<Self> {
        for l in left {
            if !systems.iter().any(|s| s.label == *l) {
                return Err(LinalgError::UnknownSystem((*l).to_string()));
            }
        }
        let n = systems.len();
        let mut strides = vec![1usize; n];
        for s in (0..n.saturating_sub(1)).rev() {
            strides[s] = strides[s + 1] * systems[s + 1].dim;
        }
        let is_left = |s: &System| left.contains(&s.label.as_str());
        let mut left_systems = Vec::new();
        let mut right_systems = Vec::new();
        let mut left_axes = Vec::new();
        let mut right_axes = Vec::new();
        for (i, s) in systems.iter().enumerate() {
            if is_left(s) {
                left_systems.push(s.clone());
                left_axes.push((s.dim, strides[i]));
            } else {
                right_systems.push(s.clone());
                right_axes.push((s.dim, strides[i]));
            }
        }
        Ok(Self {
            left_offsets: offsets(&left_axes),
            right_offsets: offsets(&right_axes),
            left_systems,
            right_systems,
        })
    }

    fn coefficient_matrix<T: Real>(&self, amps: &[Complex<T>]) -> CMatrix<T> {
        CMatrix::from_fn(self.left_offsets.len(), self.right_offsets.len(), |a, b| {
            amps[self.left_offsets[a] + self.right_offsets[b]]
        })
    }
}

/// Flat offsets of every multi-index over the given (dim, stride) axes, in
/// row-major order of the axes.
fn offsets(axes: &[(usize, usize)]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &(dim, stride) in axes {
        let mut next = Vec::with_capacity(out.len() * dim);
        for &o in &out {
            for k in 0..dim {
                next.push(o + k * stride);
            }
        }
        out = next;
    }
    out
}

/// Purifies a density matrix as `Σ_i sqrt(λ_i) |v_i>|i>` with ancilla
/// dimension equal to the numerical rank (eigenvalues above `rank_tol`).
pub fn purify<T: Real>(
    rho: &HermitianMatrix<T>,
    primary_label: &str,
    ancilla_label: &str,
    rank_tol: T,
) -> Result<PureState<T>> {
    let tr = rho.trace();
    if (tr - T::one()).abs() > tol_for::<T>(1e-9) {
        return Err(LinalgError::BadTrace { trace: tr.to_f64_lossy() });
    }
    let eig = rho.eig();
    let min = *eig.values.last().expect("non-empty");
    if min < -rank_tol {
        return Err(LinalgError::NotPsd { min_eigenvalue: min.to_f64_lossy() });
    }
    let rank = eig.values.iter().filter(|&&l| l > rank_tol).count().max(1);
    let n = rho.dim();
    let mut amps = vec![czero(); n * rank];
    for i in 0..rank {
        let w = eig.values[i].max(T::zero()).sqrt();
        for p in 0..n {
            amps[p * rank + i] = eig.vectors[(p, i)] * w;
        }
    }
    let systems = vec![System::new(primary_label, n), System::new(ancilla_label, rank)];
    // Clamped eigenvalues can leave the norm a hair off one.
    PureState::normalized(systems, amps)
}

/// Schmidt form `Σ_j sqrt(q_j) |φ_j>|ϕ_j>` with `q_j` descending.
#[derive(Clone, Debug)]
pub struct Schmidt<T> {
    pub coefficients: Vec<T>,
    pub left: Vec<Vec<Complex<T>>>,
    pub right: Vec<Vec<Complex<T>>>,
    pub left_systems: Vec<System>,
    pub right_systems: Vec<System>,
}

/// Default cutoff on squared Schmidt coefficients.
pub const DEFAULT_SCHMIDT_TOL: f64 = 1e-13;

pub fn schmidt<T: Real>(state: &PureState<T>, left: &[&str]) -> Result<Schmidt<T>> {
    schmidt_with_tol(state, left, tol_for(DEFAULT_SCHMIDT_TOL))
}

/// Schmidt decomposition keeping squared coefficients above `tol`.
pub fn schmidt_with_tol<T: Real>(state: &PureState<T>, left: &[&str], tol: T) -> Result<Schmidt<T>> {
    let nleft = state.systems.iter().filter(|s| left.contains(&s.label.as_str())).count();
    if left.is_empty() || nleft == 0 || nleft == state.systems.len() {
        return Err(LinalgError::InvalidPartition("left systems must be a nonempty proper subset".into()));
    }
    let split = Bipartition::new(&state.systems, left)?;
    let m = split.coefficient_matrix(&state.amplitudes);
    let (l, r) = (m.rows(), m.cols());
    let mut coefficients = Vec::new();
    let mut lefts = Vec::new();
    let mut rights = Vec::new();
    if l <= r {
        let rho = m.matmul(&m.adjoint());
        let eig = jacobi(&rho)?;
        for (j, &q) in eig.values.iter().enumerate() {
            if q <= tol {
                break;
            }
            let phi = eig.vector(j);
            let s = q.sqrt();
            let varphi: Vec<_> = (0..r)
                .map(|b| (0..l).fold(czero(), |acc, a| acc + phi[a].conj() * m[(a, b)]) / s)
                .collect();
            // dividing by a tiny coefficient loses orthogonality
            let Some(varphi) = orthonormalize_against(&varphi, &rights, T::lit(0.5)) else {
                break;
            };
            coefficients.push(q);
            lefts.push(phi);
            rights.push(varphi);
        }
    } else {
        // ρ_right = M^T M^*
        let rho = m.transpose().matmul(&m.conj());
        let eig = jacobi(&rho)?;
        for (j, &q) in eig.values.iter().enumerate() {
            if q <= tol {
                break;
            }
            let varphi = eig.vector(j);
            let s = q.sqrt();
            let phi: Vec<_> = (0..l)
                .map(|a| (0..r).fold(czero(), |acc, b| acc + m[(a, b)] * varphi[b].conj()) / s)
                .collect();
            let Some(phi) = orthonormalize_against(&phi, &lefts, T::lit(0.5)) else {
                break;
            };
            coefficients.push(q);
            lefts.push(phi);
            rights.push(varphi);
        }
    }
    Ok(Schmidt {
        coefficients,
        left: lefts,
        right: rights,
        left_systems: split.left_systems,
        right_systems: split.right_systems,
    })
}

/// Partial trace of an operator on the ordered product of `systems`,
/// tracing out every factor listed in `traced`.
pub fn partial_trace<T: Real>(
    m: &CMatrix<T>,
    systems: &[System],
    traced: &[&str],
) -> Result<(CMatrix<T>, Vec<System>)> {
    let total: usize = systems.iter().map(|s| s.dim).product();
    if !m.is_square() || m.rows() != total {
        return Err(LinalgError::DimensionMismatch(format!(
            "operator is {}x{} but systems factor to {}",
            m.rows(),
            m.cols(),
            total
        )));
    }
    check_labels(systems)?;
    for t in traced {
        if !systems.iter().any(|s| s.label == *t) {
            return Err(LinalgError::UnknownSystem((*t).to_string()));
        }
    }
    let keep: Vec<&str> =
        systems.iter().filter(|s| !traced.contains(&s.label.as_str())).map(|s| s.label.as_str()).collect();
    let split = Bipartition::new(systems, &keep)?;
    let nk = split.left_offsets.len();
    let mut out = CMatrix::zeros(nk, nk);
    for a in 0..nk {
        for b in 0..nk {
            let mut acc = czero();
            for &t in &split.right_offsets {
                acc += m[(split.left_offsets[a] + t, split.left_offsets[b] + t)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok((out, split.left_systems))
}

/// Orthonormalizes `v` against `basis` (assumed orthonormal) with two
/// passes of modified Gram–Schmidt. Returns `None` when the remainder is
/// shorter than `tol`.
pub fn orthonormalize_against<T: Real>(
    v: &[Complex<T>],
    basis: &[Vec<Complex<T>>],
    tol: T,
) -> Option<Vec<Complex<T>>> {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = inner(b, &w);
            for (wi, &bi) in w.iter_mut().zip(b) {
                *wi -= bi * c;
            }
        }
    }
    let n = norm(&w);
    if n <= tol {
        return None;
    }
    for wi in &mut w {
        *wi /= n;
    }
    Some(w)
}
