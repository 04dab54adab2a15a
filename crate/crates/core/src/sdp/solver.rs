//! Primal-dual path-following interior-point method (HKM direction,
//! Mehrotra predictor-corrector) on real symmetric blocks.

use std::collections::HashMap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{real_embed, unembed, RealBlockProblem};
use super::problem::{BlockSdpProblem, BlockSdpSolution, SdpError, SolveStatus};
use crate::linalg::{cholesky_solve, RMatrix};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-9, max_iter: 200 }
    }
}

/// Rows whose Gram-matrix pivot falls below this fraction of the largest
/// squared row norm are treated as linearly dependent.
pub const DEPENDENT_ROW_TOL: f64 = 1e-10;

const STEP_FRACTION: f64 = 0.98;
/// Iterative refinement passes on each Schur solve.
const REFINE_STEPS: usize = 2;

/// Solves `problem` through its real embedding.
///
/// Malformed input is an error; iteration limits and numerical breakdown
/// come back as a solution whose `status` says so.
pub fn solve<T: Real>(problem: &BlockSdpProblem<T>, opts: &SolverOptions) -> Result<BlockSdpSolution<T>, SdpError> {
    problem.validate()?;
    let real = real_embed(problem);
    let (kept, dropped) = independent_rows(&real);
    if !dropped.is_empty() {
        debug!("dropped {} dependent constraint rows", dropped.len());
    }
    let layout = Layout::new(&real, &kept);
    let run = Ipm::new(&layout, opts).run();
    let mut y = vec![T::zero(); problem.num_constraints()];
    for (k, &i) in kept.iter().enumerate() {
        y[i] = run.y[k];
    }
    let x: Vec<_> = run.x.iter().map(unembed).collect();
    let primal_objective = problem.objective_value(&x);
    let dual_objective = problem.constraints.iter().zip(&y).map(|(c, &yi)| c.rhs * yi).sum();
    Ok(BlockSdpSolution {
        x,
        y,
        primal_objective,
        dual_objective,
        status: run.status,
        iterations: run.iterations,
        dropped_rows: dropped,
    })
}

/// Cholesky of the row Gram matrix in constraint order, dropping each row
/// whose residual pivot is negligible.
fn independent_rows<T: Real>(p: &RealBlockProblem<T>) -> (Vec<usize>, Vec<usize>) {
    let m = p.rows.len();
    if m == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut by_key: HashMap<(usize, usize, usize), Vec<(usize, T)>> = HashMap::new();
    for (i, row) in p.rows.iter().enumerate() {
        for e in row {
            by_key.entry((e.block, e.row, e.col)).or_default().push((i, e.value));
        }
    }
    let mut g = RMatrix::<T>::zeros(m, m);
    for list in by_key.values() {
        // merge duplicate keys within one row first
        let mut merged: Vec<(usize, T)> = Vec::with_capacity(list.len());
        for &(i, v) in list {
            match merged.last_mut() {
                Some((j, w)) if *j == i => *w += v,
                _ => merged.push((i, v)),
            }
        }
        for (a, &(i, vi)) in merged.iter().enumerate() {
            for &(j, vj) in &merged[a..] {
                g[(i, j)] += vi * vj;
            }
        }
    }
    let gmax = (0..m).map(|i| g[(i, i)]).fold(T::zero(), |a, b| a.max(b));
    let tol = T::lit(DEPENDENT_ROW_TOL) * gmax;
    // l holds the factor rows of the kept constraints, in kept order.
    let mut l: Vec<Vec<T>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..m {
        let mut li = Vec::with_capacity(kept.len() + 1);
        for (k, &j) in kept.iter().enumerate() {
            let gij = if j <= i { g[(j, i)] } else { g[(i, j)] };
            let lk: &Vec<T> = &l[k];
            let s: T = lk[..k].iter().zip(&li[..k]).map(|(&a, &b)| a * b).sum();
            li.push((gij - s) / lk[k]);
        }
        let s: T = li.iter().map(|&v| v * v).sum();
        let pivot = g[(i, i)] - s;
        if pivot > tol {
            li.push(pivot.sqrt());
            l.push(li);
            kept.push(i);
        } else {
            dropped.push(i);
        }
    }
    (kept, dropped)
}

/// `(block, [(r, c, v)])`: one row's entries inside one block.
type BlockPart<T> = (usize, Vec<(usize, usize, T)>);

/// Constraint rows grouped by block, as the Schur assembly wants them.
struct Layout<T> {
    dims: Vec<usize>,
    rhs: Vec<T>,
    c: Vec<RMatrix<T>>,
    /// row -> [(block, [(r, c, v)])]
    row_blocks: Vec<Vec<BlockPart<T>>>,
    /// block -> [(row, slot in row_blocks[row])], rows ascending
    block_rows: Vec<Vec<(usize, usize)>>,
}

impl<T: Real> Layout<T> {
    fn new(p: &RealBlockProblem<T>, kept: &[usize]) -> Self {
        let nb = p.block_dims.len();
        let mut row_blocks = Vec::with_capacity(kept.len());
        let mut block_rows = vec![Vec::new(); nb];
        for (k, &i) in kept.iter().enumerate() {
            let mut per_block: Vec<BlockPart<T>> = Vec::new();
            for e in &p.rows[i] {
                match per_block.iter_mut().find(|(b, _)| *b == e.block) {
                    Some((_, v)) => v.push((e.row, e.col, e.value)),
                    None => per_block.push((e.block, vec![(e.row, e.col, e.value)])),
                }
            }
            per_block.sort_by_key(|(b, _)| *b);
            for (slot, (b, _)) in per_block.iter().enumerate() {
                block_rows[*b].push((k, slot));
            }
            row_blocks.push(per_block);
        }
        Self {
            dims: p.block_dims.clone(),
            rhs: kept.iter().map(|&i| p.rhs[i]).collect(),
            c: p.objective_blocks(),
            row_blocks,
            block_rows,
        }
    }

    fn m(&self) -> usize {
        self.rhs.len()
    }

    /// `A(K)`; only the symmetric part of `K` matters.
    fn apply(&self, k: &[RMatrix<T>]) -> Vec<T> {
        self.row_blocks
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(b, ents)| ents.iter().map(|&(r, c, v)| v * k[*b][(r, c)]).sum::<T>())
                    .sum()
            })
            .collect()
    }

    /// `A^T y`
    fn adjoint(&self, y: &[T]) -> Vec<RMatrix<T>> {
        let mut out: Vec<RMatrix<T>> = self.dims.iter().map(|&n| RMatrix::zeros(n, n)).collect();
        for (row, &yi) in self.row_blocks.iter().zip(y) {
            for (b, ents) in row {
                for &(r, c, v) in ents {
                    out[*b][(r, c)] += v * yi;
                }
            }
        }
        out
    }

    /// `M_ij = tr(A_i X A_j Z)`, symmetric.
    fn schur(&self, x: &[RMatrix<T>], z: &[RMatrix<T>]) -> RMatrix<T> {
        let m = self.m();
        let nmax = self.dims.iter().copied().max().unwrap_or(0);
        let mut mat = RMatrix::<T>::zeros(m, m);
        mat.as_mut_slice().par_chunks_mut(m).enumerate().for_each_init(
            || vec![T::zero(); nmax * nmax],
            |w, (i, mrow)| {
                for (b, ents) in &self.row_blocks[i] {
                    let n = self.dims[*b];
                    let (xb, zb) = (&x[*b], &z[*b]);
                    let w = &mut w[..n * n];
                    w.iter_mut().for_each(|v| *v = T::zero());
                    // W = X A_i Z, one outer product per entry
                    for &(q, r, a) in ents {
                        let xq = xb.row(q);
                        let zr = zb.row(r);
                        for s in 0..n {
                            let xs = a * xq[s];
                            if xs == T::zero() {
                                continue;
                            }
                            for (wv, &zv) in w[s * n..(s + 1) * n].iter_mut().zip(zr) {
                                *wv += xs * zv;
                            }
                        }
                    }
                    let rows = &self.block_rows[*b];
                    let start = rows.partition_point(|&(j, _)| j < i);
                    for &(j, slot) in &rows[start..] {
                        let acc: T = self.row_blocks[j][slot].1.iter().map(|&(s, p, c)| c * w[p * n + s]).sum();
                        mrow[j] += acc;
                    }
                }
            },
        );
        for i in 0..m {
            for j in (i + 1)..m {
                mat[(j, i)] = mat[(i, j)];
            }
        }
        mat
    }
}

struct IpmResult<T> {
    x: Vec<RMatrix<T>>,
    y: Vec<T>,
    status: SolveStatus,
    iterations: usize,
}

struct Ipm<'a, T> {
    lay: &'a Layout<T>,
    opts: &'a SolverOptions,
}

fn dot_blocks<T: Real>(a: &[RMatrix<T>], b: &[RMatrix<T>]) -> T {
    a.iter().zip(b).map(|(u, v)| u.dot(v)).sum()
}

fn max_abs_blocks<T: Real>(a: &[RMatrix<T>]) -> T {
    a.iter().fold(T::zero(), |m, b| m.max(b.max_abs()))
}

/// Largest `α ≤ 1` keeping `X + α ΔX` positive definite, shortened by `gamma`.
fn max_step<T: Real>(linv: &[RMatrix<T>], dx: &[RMatrix<T>], gamma: T) -> T {
    let mut lmin = T::infinity();
    for (li, d) in linv.iter().zip(dx) {
        let mut w = li.matmul(d).matmul(&li.transpose());
        w.symmetrize();
        lmin = lmin.min(w.sym_eigenvalues()[0]);
    }
    if lmin >= T::zero() {
        T::one()
    } else {
        T::one().min(-gamma / lmin)
    }
}

struct Direction<T> {
    dx: Vec<RMatrix<T>>,
    ds: Vec<RMatrix<T>>,
    dy: Vec<T>,
}

impl<'a, T: Real> Ipm<'a, T> {
    fn new(lay: &'a Layout<T>, opts: &'a SolverOptions) -> Self {
        Self { lay, opts }
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        schur: &RMatrix<T>,
        chol: &RMatrix<T>,
        x: &[RMatrix<T>],
        z: &[RMatrix<T>],
        rp: &[T],
        rd: &[RMatrix<T>],
        sigma_mu: T,
        corr: Option<&Direction<T>>,
    ) -> Direction<T> {
        // K = σμZ − X − X Rd Z − ΔXa ΔSa Z
        let k: Vec<RMatrix<T>> = (0..x.len())
            .map(|b| {
                let mut kb = z[b].clone();
                kb.scale(sigma_mu);
                kb.add_scaled(&x[b], -T::one());
                kb.add_scaled(&x[b].matmul(&rd[b]).matmul(&z[b]), -T::one());
                if let Some(c) = corr {
                    kb.add_scaled(&c.dx[b].matmul(&c.ds[b]).matmul(&z[b]), -T::one());
                }
                kb
            })
            .collect();
        let ak = self.lay.apply(&k);
        let rhs: Vec<T> = rp.iter().zip(&ak).map(|(&r, &a)| r - a).collect();
        let mut dy = rhs.clone();
        cholesky_solve(chol, &mut dy);
        // refinement against the unshifted matrix
        for _ in 0..REFINE_STEPS {
            let mut res: Vec<T> =
                (0..dy.len()).map(|i| rhs[i] - schur.row(i).iter().zip(&dy).map(|(&a, &b)| a * b).sum::<T>()).collect();
            cholesky_solve(chol, &mut res);
            for (d, r) in dy.iter_mut().zip(&res) {
                *d += *r;
            }
        }
        let aty = self.lay.adjoint(&dy);
        let mut dx = Vec::with_capacity(x.len());
        let mut ds = Vec::with_capacity(x.len());
        for b in 0..x.len() {
            let mut dsb = rd[b].clone();
            dsb.add_scaled(&aty[b], -T::one());
            let mut dxb = k[b].clone();
            dxb.add_scaled(&x[b].matmul(&aty[b]).matmul(&z[b]), T::one());
            dxb.symmetrize();
            dx.push(dxb);
            ds.push(dsb);
        }
        Direction { dx, ds, dy }
    }

    fn run(&self) -> IpmResult<T> {
        let lay = self.lay;
        let m = lay.m();
        let n_total: usize = lay.dims.iter().sum();
        let nt = T::from_usize(n_total).expect("dimension");
        let gap_tol = T::lit(self.opts.gap_tol);
        let feas_tol = T::lit(self.opts.feas_tol);
        let gamma = T::lit(STEP_FRACTION);

        let tau = T::one() + lay.rhs.iter().fold(T::zero(), |a, &r| a.max(r.abs()));
        let mut x: Vec<RMatrix<T>> = lay.dims.iter().map(|&n| RMatrix::scaled_identity(n, tau)).collect();
        let mut s: Vec<RMatrix<T>> = lay.dims.iter().map(|&n| RMatrix::scaled_identity(n, tau)).collect();
        let mut y = vec![T::zero(); m];

        let fail = |x: Vec<RMatrix<T>>, y: Vec<T>, status, iterations| IpmResult { x, y, status, iterations };

        for iter in 0..self.opts.max_iter {
            let ax = lay.apply(&x);
            let rp: Vec<T> = lay.rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
            let aty = lay.adjoint(&y);
            let rd: Vec<RMatrix<T>> = (0..x.len())
                .map(|b| {
                    let mut r = lay.c[b].clone();
                    r.add_scaled(&aty[b], -T::one());
                    r.add_scaled(&s[b], -T::one());
                    r
                })
                .collect();
            let pobj = dot_blocks(&lay.c, &x);
            let dobj: T = lay.rhs.iter().zip(&y).map(|(&b, &v)| b * v).sum();
            let mu = dot_blocks(&x, &s) / nt;
            let pinf = rp.iter().fold(T::zero(), |a, &r| a.max(r.abs()));
            let dinf = max_abs_blocks(&rd);
            let relgap = (pobj - dobj).abs() / (T::one() + pobj.abs());
            debug!(
                "iter {iter:3} pobj {:.10e} dobj {:.10e} gap {:.2e} pinf {:.2e} dinf {:.2e} mu {:.2e}",
                pobj.to_f64_lossy(),
                dobj.to_f64_lossy(),
                relgap.to_f64_lossy(),
                pinf.to_f64_lossy(),
                dinf.to_f64_lossy(),
                mu.to_f64_lossy()
            );
            if relgap <= gap_tol && pinf <= feas_tol && dinf <= feas_tol {
                return IpmResult { x, y, status: SolveStatus::Optimal, iterations: iter };
            }
            if !(pobj.is_finite() && dobj.is_finite() && mu.is_finite()) {
                return fail(x, y, SolveStatus::NumericalFailure, iter);
            }

            let mut linv_x = Vec::with_capacity(x.len());
            let mut linv_s = Vec::with_capacity(x.len());
            let mut z = Vec::with_capacity(x.len());
            for b in 0..x.len() {
                let (Ok(lx), Ok(ls)) = (x[b].cholesky(), s[b].cholesky()) else {
                    warn!("iterate left the positive definite cone at iteration {iter}");
                    return fail(x, y, SolveStatus::NumericalFailure, iter);
                };
                let lsi = ls.lower_inverse();
                let mut zb = lsi.transpose().matmul(&lsi);
                zb.symmetrize();
                z.push(zb);
                linv_x.push(lx.lower_inverse());
                linv_s.push(lsi);
            }

            let schur = lay.schur(&x, &z);
            let Some(chol) = regularized_cholesky(schur.clone()) else {
                warn!("Schur complement singular at iteration {iter}");
                return fail(x, y, SolveStatus::NumericalFailure, iter);
            };

            let pred = self.direction(&schur, &chol, &x, &z, &rp, &rd, T::zero(), None);
            let ap = max_step(&linv_x, &pred.dx, T::one());
            let ad = max_step(&linv_s, &pred.ds, T::one());
            let mut mu_aff = T::zero();
            for b in 0..x.len() {
                let mut xa = x[b].clone();
                xa.add_scaled(&pred.dx[b], ap);
                let mut sa = s[b].clone();
                sa.add_scaled(&pred.ds[b], ad);
                mu_aff += xa.dot(&sa);
            }
            mu_aff /= nt;
            let sigma = (mu_aff / mu).max(T::zero()).min(T::one()).powi(3);

            let dir = self.direction(&schur, &chol, &x, &z, &rp, &rd, sigma * mu, Some(&pred));
            let ap = max_step(&linv_x, &dir.dx, gamma);
            let ad = max_step(&linv_s, &dir.ds, gamma);
            if !(ap.is_finite() && ad.is_finite()) || (ap < T::lit(1e-10) && ad < T::lit(1e-10)) {
                warn!("step lengths collapsed at iteration {iter}");
                return fail(x, y, SolveStatus::NumericalFailure, iter);
            }
            for b in 0..x.len() {
                x[b].add_scaled(&dir.dx[b], ap);
                x[b].symmetrize();
                s[b].add_scaled(&dir.ds[b], ad);
                s[b].symmetrize();
            }
            for (yi, &d) in y.iter_mut().zip(&dir.dy) {
                *yi += ad * d;
            }
        }
        fail(x, y, SolveStatus::MaxIterations, self.opts.max_iter)
    }
}

/// Cholesky with a growing diagonal shift when the matrix is numerically
/// singular; gives up once the shift would exceed 1e-6 of the largest diagonal.
fn regularized_cholesky<T: Real>(mut mat: RMatrix<T>) -> Option<RMatrix<T>> {
    let n = mat.rows();
    let maxdiag = (0..n).map(|i| mat[(i, i)]).fold(T::zero(), |a, b| a.max(b));
    if !(maxdiag > T::zero()) {
        return None;
    }
    let mut shift = T::zero();
    loop {
        if let Ok(l) = mat.cholesky_par() {
            return Some(l);
        }
        let next = if shift == T::zero() { T::lit(1e-14) * maxdiag } else { shift * T::lit(100.0) };
        if next > T::lit(1e-6) * maxdiag {
            return None;
        }
        debug!("regularizing Schur complement by {:e}", next.to_f64_lossy());
        for i in 0..n {
            mat[(i, i)] += next - shift;
        }
        shift = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::HermEntry;
    use num_complex::Complex;

    fn re(v: f64) -> Complex<f64> {
        Complex::new(v, 0.0)
    }

    #[test]
    fn lp_embedded_as_sdp() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_objective(b, 0, 0, re(1.0));
        p.add_constraint(vec![HermEntry::new(b, 0, 0, re(1.0)), HermEntry::new(b, 1, 1, re(1.0))], 1.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-8);
        assert!((sol.x[0][(1, 1)].re - 1.0).abs() < 1e-7);
    }

    #[test]
    fn min_eigenvalue_problem() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_objective(b, 0, 1, re(1.0));
        p.add_constraint(vec![HermEntry::new(b, 0, 0, re(1.0)), HermEntry::new(b, 1, 1, re(1.0))], 1.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-7);
        assert!((sol.dual_objective + 1.0).abs() < 1e-7);
        // projector onto (1, −1)/√2
        assert!((sol.x[0][(0, 1)].re + 0.5).abs() < 1e-6);
    }

    #[test]
    fn complex_objective_min_eigenvalue() {
        // C = [[0, i], [−i, 0]] has eigenvalues ±1
        let mut p = BlockSdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_objective(b, 0, 1, Complex::new(0.0, 1.0));
        p.add_constraint(vec![HermEntry::new(b, 0, 0, re(1.0)), HermEntry::new(b, 1, 1, re(1.0))], 1.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-7);
    }

    #[test]
    fn duplicate_rows_are_dropped() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_objective(b, 0, 0, re(1.0));
        let tr = vec![HermEntry::new(b, 0, 0, re(1.0)), HermEntry::new(b, 1, 1, re(1.0))];
        p.add_constraint(tr.clone(), 1.0);
        p.add_constraint(tr.iter().map(|e| HermEntry { value: e.value * 2.0, ..*e }).collect(), 2.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.dropped_rows, vec![1]);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.primal_objective.abs() < 1e-8);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut p = BlockSdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_objective(b, 0, 1, re(1.0));
        p.add_constraint(vec![HermEntry::new(b, 0, 0, re(1.0)), HermEntry::new(b, 1, 1, re(1.0))], 1.0);
        let sol = solve(&p, &SolverOptions { max_iter: 2, ..Default::default() }).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIterations);
    }

    #[test]
    fn malformed_problem_is_an_error() {
        let p = BlockSdpProblem::<f64>::new();
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(SdpError::Malformed(_))));
    }

    #[test]
    fn generic_over_f32() {
        let mut p = BlockSdpProblem::<f32>::new();
        let b = p.add_block("X", 2);
        p.add_objective(b, 0, 1, Complex::new(1.0, 0.0));
        p.add_constraint(
            vec![HermEntry::new(b, 0, 0, Complex::new(1.0, 0.0)), HermEntry::new(b, 1, 1, Complex::new(1.0, 0.0))],
            1.0,
        );
        let sol = solve(&p, &SolverOptions { gap_tol: 1e-4, feas_tol: 1e-4, max_iter: 100 }).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective + 1.0).abs() < 1e-3);
    }
}
