use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{CMatrix, HermitianMatrix};
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("solution does not match problem: {0}")]
    ShapeMismatch(String),
    #[error("dump parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One upper-triangle entry of a sparse Hermitian coefficient matrix.
///
/// `row <= col`; the entry stands for `value` at `(row, col)` and its
/// conjugate at `(col, row)`. Diagonal values must be real.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermEntry<T> {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: Complex<T>,
}

impl<T: Real> HermEntry<T> {
    /// Normalizes a lower-triangle entry to the upper triangle.
    pub fn new(block: usize, row: usize, col: usize, value: Complex<T>) -> Self {
        if row <= col {
            Self { block, row, col, value }
        } else {
            Self { block, row: col, col: row, value: value.conj() }
        }
    }

    /// Contribution of this entry to `tr(A X)`.
    #[inline]
    pub fn inner(&self, x: &CMatrix<T>) -> T {
        if self.row == self.col {
            self.value.re * x[(self.row, self.row)].re
        } else {
            let two = T::lit(2.0);
            two * (self.value.conj() * x[(self.row, self.col)]).re
        }
    }
}

/// `Σ_b tr(A_{i,b} X_b) = rhs`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint<T> {
    pub terms: Vec<HermEntry<T>>,
    pub rhs: T,
}

/// Minimize `Σ_b tr(C_b X_b)` over Hermitian PSD blocks subject to linear
/// equality constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSdpProblem<T> {
    pub block_dims: Vec<usize>,
    pub block_names: Vec<String>,
    pub objective: Vec<HermEntry<T>>,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Real> Default for BlockSdpProblem<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> BlockSdpProblem<T> {
    pub fn new() -> Self {
        Self { block_dims: Vec::new(), block_names: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> usize {
        self.block_dims.push(dim);
        self.block_names.push(name.into());
        self.block_dims.len() - 1
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Adds `value` at `(row, col)` (and its conjugate mirror) of `C_block`.
    pub fn add_objective(&mut self, block: usize, row: usize, col: usize, value: Complex<T>) {
        self.objective.push(HermEntry::new(block, row, col, value));
    }

    /// Adds a dense Hermitian objective block, skipping zero entries.
    pub fn add_objective_matrix(&mut self, block: usize, c: &HermitianMatrix<T>) {
        let n = c.dim();
        for r in 0..n {
            for col in r..n {
                let v = c[(r, col)];
                if v.re != T::zero() || v.im != T::zero() {
                    self.objective.push(HermEntry { block, row: r, col, value: v });
                }
            }
        }
    }

    pub fn add_constraint(&mut self, terms: Vec<HermEntry<T>>, rhs: T) {
        self.constraints.push(Constraint { terms, rhs });
    }

    /// Checks indices, dimensions and real diagonals.
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.block_dims.is_empty() {
            return Err(SdpError::Malformed("no blocks".into()));
        }
        if self.block_names.len() != self.block_dims.len() {
            return Err(SdpError::Malformed("block names and dims differ in length".into()));
        }
        if let Some(b) = self.block_dims.iter().position(|&d| d == 0) {
            return Err(SdpError::Malformed(format!("block {b} has dimension 0")));
        }
        let check = |e: &HermEntry<T>, what: &str| -> Result<(), SdpError> {
            let dim = *self
                .block_dims
                .get(e.block)
                .ok_or_else(|| SdpError::Malformed(format!("{what} references undeclared block {}", e.block)))?;
            if e.row > e.col || e.col >= dim {
                return Err(SdpError::Malformed(format!(
                    "{what} entry ({}, {}) invalid for block {} of dim {dim}",
                    e.row, e.col, e.block
                )));
            }
            if e.row == e.col && e.value.im != T::zero() {
                return Err(SdpError::Malformed(format!("{what} has a non-real diagonal entry")));
            }
            if !e.value.re.is_finite() || !e.value.im.is_finite() {
                return Err(SdpError::Malformed(format!("{what} has a non-finite entry")));
            }
            Ok(())
        };
        for e in &self.objective {
            check(e, "objective")?;
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.terms.is_empty() {
                return Err(SdpError::Malformed(format!("constraint {i} is empty")));
            }
            if !c.rhs.is_finite() {
                return Err(SdpError::Malformed(format!("constraint {i} has a non-finite rhs")));
            }
            for e in &c.terms {
                check(e, &format!("constraint {i}"))?;
            }
        }
        Ok(())
    }

    /// `Σ_b tr(C_b X_b)`
    pub fn objective_value(&self, x: &[HermitianMatrix<T>]) -> T {
        self.objective.iter().map(|e| e.inner(x[e.block].matrix())).sum()
    }

    /// `Σ_b tr(A_{i,b} X_b)` for each constraint.
    pub fn constraint_values(&self, x: &[HermitianMatrix<T>]) -> Vec<T> {
        self.constraints.iter().map(|c| c.terms.iter().map(|e| e.inner(x[e.block].matrix())).sum()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockSdpSolution<T> {
    pub x: Vec<HermitianMatrix<T>>,
    pub y: Vec<T>,
    pub primal_objective: T,
    pub dual_objective: T,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Constraint rows dropped as numerically dependent before solving.
    pub dropped_rows: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub max_constraint_violation: f64,
    pub min_block_eigenvalue: f64,
    pub duality_gap: f64,
}

/// Recomputes feasibility, positivity and gap directly from the problem data.
pub fn residuals<T: Real>(problem: &BlockSdpProblem<T>, solution: &BlockSdpSolution<T>) -> Result<Residuals, SdpError> {
    if solution.x.len() != problem.num_blocks() {
        return Err(SdpError::ShapeMismatch(format!(
            "{} block values for {} blocks",
            solution.x.len(),
            problem.num_blocks()
        )));
    }
    for (b, (x, &d)) in solution.x.iter().zip(&problem.block_dims).enumerate() {
        if x.dim() != d {
            return Err(SdpError::ShapeMismatch(format!("block {b} has dim {} not {d}", x.dim())));
        }
    }
    if solution.y.len() != problem.num_constraints() {
        return Err(SdpError::ShapeMismatch(format!(
            "{} duals for {} constraints",
            solution.y.len(),
            problem.num_constraints()
        )));
    }
    let viol = problem
        .constraint_values(&solution.x)
        .iter()
        .zip(&problem.constraints)
        .fold(0.0f64, |m, (&v, c)| m.max((v - c.rhs).to_f64_lossy().abs()));
    let min_eig = solution
        .x
        .iter()
        .map(|x| x.min_eigenvalue().to_f64_lossy())
        .fold(f64::INFINITY, f64::min);
    let pobj = problem.objective_value(&solution.x).to_f64_lossy();
    let dobj: f64 = problem
        .constraints
        .iter()
        .zip(&solution.y)
        .map(|(c, &y)| (c.rhs * y).to_f64_lossy())
        .sum();
    Ok(Residuals { max_constraint_violation: viol, min_block_eigenvalue: min_eig, duality_gap: (pobj - dobj).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn lower_entries_are_mirrored() {
        let e = HermEntry::new(0, 2, 1, c(1.0, 2.0));
        assert_eq!((e.row, e.col), (1, 2));
        assert_eq!(e.value, c(1.0, -2.0));
    }

    #[test]
    fn entry_inner_matches_dense_trace() {
        let x = CMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(2.0, 0.0)]);
        let e = HermEntry::new(0, 0, 1, c(0.5, -1.5));
        let a = CMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), c(0.5, -1.5), c(0.5, 1.5), c(0.0, 0.0)]);
        let want = a.matmul(&x).trace();
        assert!((e.inner(&x) - want.re).abs() < 1e-15 && want.im.abs() < 1e-15);
    }

    #[test]
    fn validate_catches_bad_input() {
        let mut p = BlockSdpProblem::<f64>::new();
        p.add_block("X", 2);
        p.add_constraint(vec![HermEntry::new(1, 0, 0, c(1.0, 0.0))], 1.0);
        assert!(p.validate().is_err());
        let mut p = BlockSdpProblem::<f64>::new();
        p.add_block("X", 2);
        p.add_constraint(vec![HermEntry::new(0, 0, 2, c(1.0, 0.0))], 1.0);
        assert!(p.validate().is_err());
        let mut p = BlockSdpProblem::<f64>::new();
        p.add_block("X", 2);
        p.add_constraint(vec![HermEntry::new(0, 1, 1, c(1.0, 1.0))], 1.0);
        assert!(p.validate().is_err());
    }

    fn trace_one_problem() -> BlockSdpProblem<f64> {
        let mut p = BlockSdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_constraint(vec![HermEntry::new(b, 0, 0, c(1.0, 0.0)), HermEntry::new(b, 1, 1, c(1.0, 0.0))], 1.0);
        p
    }

    fn fake_solution(x: CMatrix<f64>) -> BlockSdpSolution<f64> {
        BlockSdpSolution {
            x: vec![HermitianMatrix::new(x, 1e-12).unwrap()],
            y: vec![0.0],
            primal_objective: 0.0,
            dual_objective: 0.0,
            status: SolveStatus::Optimal,
            iterations: 0,
            dropped_rows: vec![],
        }
    }

    #[test]
    fn residuals_of_zero_matrix() {
        let p = trace_one_problem();
        let r = residuals(&p, &fake_solution(CMatrix::zeros(2, 2))).unwrap();
        assert_eq!(r.max_constraint_violation, 1.0);
        assert_eq!(r.min_block_eigenvalue, 0.0);
    }

    #[test]
    fn residuals_report_constructed_violation() {
        let p = trace_one_problem();
        let r = residuals(&p, &fake_solution(CMatrix::from_real_diag(&[0.7, 0.55]))).unwrap();
        assert!((r.max_constraint_violation - 0.25).abs() < 1e-15);
    }

    #[test]
    fn residuals_shape_mismatch() {
        let p = trace_one_problem();
        let s = fake_solution(CMatrix::identity(3));
        assert!(matches!(residuals(&p, &s), Err(SdpError::ShapeMismatch(_))));
    }
}
