//! Complex Hermitian blocks as structured real symmetric blocks:
//! `H ↦ [[Re H, −Im H], [Im H, Re H]]`, coefficients halved so that trace
//! inner products carry over unchanged.

use num_complex::Complex;

use super::problem::{BlockSdpProblem, HermEntry};
use crate::linalg::{CMatrix, HermitianMatrix, RMatrix};
use crate::num::Real;

/// One entry of a sparse real symmetric matrix. Both triangles are listed,
/// so `tr(A X) = Σ value · X[row][col]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEntry<T> {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RealBlockProblem<T> {
    pub block_dims: Vec<usize>,
    pub objective: Vec<SymEntry<T>>,
    pub rows: Vec<Vec<SymEntry<T>>>,
    pub rhs: Vec<T>,
}

impl<T: Real> RealBlockProblem<T> {
    pub fn row_value(&self, i: usize, x: &[RMatrix<T>]) -> T {
        self.rows[i].iter().map(|e| e.value * x[e.block][(e.row, e.col)]).sum()
    }

    pub fn objective_value(&self, x: &[RMatrix<T>]) -> T {
        self.objective.iter().map(|e| e.value * x[e.block][(e.row, e.col)]).sum()
    }

    /// Dense per-block objective matrices.
    pub fn objective_blocks(&self) -> Vec<RMatrix<T>> {
        let mut c: Vec<RMatrix<T>> = self.block_dims.iter().map(|&n| RMatrix::zeros(n, n)).collect();
        for e in &self.objective {
            c[e.block][(e.row, e.col)] += e.value;
        }
        c
    }
}

fn push_embedded<T: Real>(e: &HermEntry<T>, d: usize, out: &mut Vec<SymEntry<T>>) {
    let half = T::lit(0.5);
    let (r, c, b) = (e.row, e.col, e.block);
    let a = e.value.re * half;
    let im = e.value.im * half;
    let mut put = |row: usize, col: usize, value: T| {
        if value != T::zero() {
            out.push(SymEntry { block: b, row, col, value });
        }
    };
    if r == c {
        put(r, r, a);
        put(r + d, r + d, a);
        return;
    }
    // Re part: a (E_rc + E_cr) in both diagonal quadrants.
    put(r, c, a);
    put(c, r, a);
    put(r + d, c + d, a);
    put(c + d, r + d, a);
    // Im part: Im A = im (E_rc − E_cr); lower-left holds Im A, upper-right −Im A.
    put(r + d, c, im);
    put(c + d, r, -im);
    put(r, c + d, -im);
    put(c, r + d, im);
}

/// Embeds every block and coefficient matrix; the right-hand sides are unchanged.
pub fn real_embed<T: Real>(problem: &BlockSdpProblem<T>) -> RealBlockProblem<T> {
    let dims = &problem.block_dims;
    let mut objective = Vec::new();
    for e in &problem.objective {
        push_embedded(e, dims[e.block], &mut objective);
    }
    let rows = problem
        .constraints
        .iter()
        .map(|c| {
            let mut row = Vec::with_capacity(8 * c.terms.len());
            for e in &c.terms {
                push_embedded(e, dims[e.block], &mut row);
            }
            row
        })
        .collect();
    RealBlockProblem {
        block_dims: dims.iter().map(|d| 2 * d).collect(),
        objective,
        rows,
        rhs: problem.constraints.iter().map(|c| c.rhs).collect(),
    }
}

/// `[[Re H, −Im H], [Im H, Re H]]` without scaling.
pub fn embed_matrix<T: Real>(h: &CMatrix<T>) -> RMatrix<T> {
    let d = h.rows();
    RMatrix::from_fn(2 * d, 2 * d, |i, j| {
        let z = h[(i % d, j % d)];
        match (i < d, j < d) {
            (true, true) | (false, false) => z.re,
            (false, true) => z.im,
            (true, false) => -z.im,
        }
    })
}

/// Inverse of [`embed_matrix`], averaging the redundant quadrants. The
/// average is a congruence mean of the input, so positivity is preserved.
pub fn unembed<T: Real>(x: &RMatrix<T>) -> HermitianMatrix<T> {
    let d = x.rows() / 2;
    let half = T::lit(0.5);
    let m = CMatrix::from_fn(d, d, |i, j| {
        let re = (x[(i, j)] + x[(i + d, j + d)]) * half;
        let im = (x[(i + d, j)] - x[(i, j + d)]) * half;
        Complex::new(re, im)
    });
    HermitianMatrix::from_matrix_unchecked(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::herm_eig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_herm(n: usize, rng: &mut ChaCha8Rng) -> CMatrix<f64> {
        let g = CMatrix::from_fn(n, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        g.hermitian_part()
    }

    #[test]
    fn embedding_doubles_spectrum() {
        let h = CMatrix::from_row_major(
            2,
            2,
            vec![Complex::new(1.0, 0.0), Complex::new(0.0, 1.0), Complex::new(0.0, -1.0), Complex::new(1.0, 0.0)],
        );
        let ev = embed_matrix(&h).sym_eigenvalues();
        let want = [0.0f64, 0.0, 2.0, 2.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-14f64, "{ev:?}");
        }
    }

    #[test]
    fn real_input_embeds_block_diagonally() {
        let h = CMatrix::from_row_major(2, 2, vec![Complex::new(2.0, 0.0), Complex::new(-1.0, 0.0), Complex::new(-1.0, 0.0), Complex::new(3.0, 0.0)]);
        let e = embed_matrix(&h);
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i < 2) == (j < 2) { h[(i % 2, j % 2)].re } else { 0.0 };
                assert_eq!(e[(i, j)], want);
            }
        }
    }

    #[test]
    fn embedded_inner_product_matches_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 3, 6] {
            let a = random_herm(n, &mut rng);
            let x = random_herm(n, &mut rng);
            let want = a.matmul(&x).trace().re;
            let mut p = BlockSdpProblem::new();
            p.add_block("X", n);
            p.add_objective_matrix(0, &HermitianMatrix::new(a, 1e-12).unwrap());
            let rp = real_embed(&p);
            let got = rp.objective_value(&[embed_matrix(&x)]);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn unembed_round_trips_and_keeps_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_herm(4, &mut rng);
        let back = unembed(&embed_matrix(&h));
        assert!(back.matrix().max_abs_diff(&h) < 1e-15);
        // an unstructured PSD real matrix still averages to a PSD Hermitian one
        let g = RMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        let psd = g.matmul(&g.transpose());
        let u = unembed(&psd);
        let ev = herm_eig(u.matrix(), 1e-12).unwrap();
        assert!(*ev.values.last().unwrap() > -1e-12);
    }
}
