//! Real dense matrices: the symmetric kernels the interior-point solver
//! runs on (Cholesky, triangular inverse, symmetric eigenvalues).

use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::num::Real;

/// Dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
}

impl<T: Real> RMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `(M + M^T) / 2`
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        let half = T::lit(0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Self::zeros(self.rows, other.cols);
        let oc = other.cols;
        for i in 0..self.rows {
            let orow = &mut out.data[i * oc..(i + 1) * oc];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(&other.data[k * oc..(k + 1) * oc]) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, s: T) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    /// `Σ_ij A_ij B_ij`, which is `tr(A B)` for symmetric arguments.
    pub fn dot(&self, other: &Self) -> T {
        self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Lower Cholesky factor `L` with `M = L L^T`.
    pub fn cholesky(&self) -> Result<Self, NotPositiveDefinite> {
        let mut l = self.clone();
        cholesky_in_place(&mut l, false)?;
        Ok(l)
    }

    /// Cholesky that farms the row updates of each column out to rayon.
    pub fn cholesky_par(&self) -> Result<Self, NotPositiveDefinite> {
        let mut l = self.clone();
        cholesky_in_place(&mut l, true)?;
        Ok(l)
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_inverse(&self) -> Self {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = T::one() / self[(j, j)];
            for i in (j + 1)..n {
                let mut acc = T::zero();
                for k in j..i {
                    acc += self[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = -acc / self[(i, i)];
            }
        }
        inv
    }

    /// Inverse of a symmetric positive definite matrix through its Cholesky factor.
    pub fn spd_inverse(&self) -> Result<Self, NotPositiveDefinite> {
        let linv = self.cholesky()?.lower_inverse();
        // (L L^T)^{-1} = L^{-T} L^{-1}
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = T::zero();
                for k in i..n {
                    acc += linv[(k, i)] * linv[(k, j)];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        Ok(out)
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn sym_eigenvalues(&self) -> Vec<T> {
        let (mut d, mut e) = tridiagonalize(self.clone());
        tql(&mut d, &mut e);
        d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        d
    }
}

impl<T> Index<(usize, usize)> for RMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for RMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
fn dot_prefix<T: Real>(a: &[T], b: &[T]) -> T {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in (4 * chunks)..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Row-major Crout Cholesky; the strict upper triangle is zeroed on success.
fn cholesky_in_place<T: Real>(m: &mut RMatrix<T>, parallel: bool) -> Result<(), NotPositiveDefinite> {
    let n = m.rows;
    assert_eq!(n, m.cols, "cholesky needs a square matrix");
    for j in 0..n {
        let (head, tail) = m.data.split_at_mut((j + 1) * n);
        let rowj = &mut head[j * n..(j + 1) * n];
        let djj = rowj[j] - dot_prefix(&rowj[..j], &rowj[..j]);
        if !(djj > T::zero()) || !djj.is_finite() {
            return Err(NotPositiveDefinite { pivot: j });
        }
        let ljj = djj.sqrt();
        rowj[j] = ljj;
        for v in &mut rowj[j + 1..] {
            *v = T::zero();
        }
        let rowj: &[T] = rowj;
        let update = |rowi: &mut [T]| {
            let v = rowi[j] - dot_prefix(&rowi[..j], &rowj[..j]);
            rowi[j] = v / ljj;
        };
        if parallel && n - j > 64 {
            tail.par_chunks_mut(n).for_each(update);
        } else {
            tail.chunks_mut(n).for_each(update);
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` in place given the lower factor.
pub fn cholesky_solve<T: Real>(l: &RMatrix<T>, b: &mut [T]) {
    let n = l.rows;
    for i in 0..n {
        let s = dot_prefix(&l.row(i)[..i], &b[..i]);
        b[i] = (b[i] - s) / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// returning the diagonal and the subdiagonal (`e[0]` unused, set to 0).
fn tridiagonalize<T: Real>(mut a: RMatrix<T>) -> (Vec<T>, Vec<T>) {
    let n = a.rows;
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    for i in (1..n).rev() {
        let l = i - 1;
        if l > 0 {
            let scale: T = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == T::zero() {
                e[i] = a[(i, l)];
                continue;
            }
            let mut h = T::zero();
            for k in 0..=l {
                a[(i, k)] /= scale;
                h += a[(i, k)] * a[(i, k)];
            }
            let f = a[(i, l)];
            let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
            e[i] = scale * g;
            h -= f * g;
            a[(i, l)] = f - g;
            let mut f = T::zero();
            for j in 0..=l {
                let mut g = T::zero();
                for k in 0..=j {
                    g += a[(j, k)] * a[(i, k)];
                }
                for k in (j + 1)..=l {
                    g += a[(k, j)] * a[(i, k)];
                }
                e[j] = g / h;
                f += e[j] * a[(i, j)];
            }
            let hh = f / (h + h);
            for j in 0..=l {
                let f = a[(i, j)];
                let g = e[j] - hh * f;
                e[j] = g;
                for k in 0..=j {
                    let v = f * e[k] + g * a[(i, k)];
                    a[(j, k)] -= v;
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = a[(i, i)];
    }
    (d, e)
}

/// Implicit QL on a symmetric tridiagonal matrix; eigenvalues land in `d`.
fn tql<T: Real>(d: &mut [T], e: &mut [T]) {
    let n = d.len();
    if n < 2 {
        return;
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let eps = T::epsilon();
    let two = T::lit(2.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                // Leaves a slightly perturbed eigenvalue; only the step
                // length rule consumes these.
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            g = d[m] - d[l] + e[l] / (g + if g >= T::zero() { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> RMatrix<f64> {
        let mut m = RMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        m.symmetrize();
        m
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> RMatrix<f64> {
        let g = RMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let mut m = g.matmul(&g.transpose());
        for i in 0..n {
            m[(i, i)] += 0.1;
        }
        m
    }

    #[test]
    fn cholesky_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 2, 5, 33, 130] {
            let m = random_spd(n, &mut rng);
            for l in [m.cholesky().unwrap(), m.cholesky_par().unwrap()] {
                let back = l.matmul(&l.transpose());
                let err = back.as_slice().iter().zip(m.as_slice()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                assert!(err < 1e-10 * n as f64, "n={n} err={err}");
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = RMatrix::<f64>::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        assert_eq!(m.cholesky().unwrap_err().pivot, 1);
    }

    #[test]
    fn cholesky_solve_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_spd(20, &mut rng);
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 3.5).collect();
        let mut b: Vec<f64> = (0..20).map(|i| (0..20).map(|j| m[(i, j)] * x[j]).sum()).collect();
        cholesky_solve(&m.cholesky().unwrap(), &mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn spd_inverse_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_spd(12, &mut rng);
        let p = m.matmul(&m.spd_inverse().unwrap());
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenvalues_of_known_matrices() {
        let m = RMatrix::<f64>::from_fn(3, 3, |i, j| if i == j { [4.0, -1.0, 2.0][i] } else { 0.0 });
        assert_eq!(m.sym_eigenvalues(), vec![-1.0, 2.0, 4.0]);
        // [[2,1],[1,2]] -> {1, 3}
        let m = RMatrix::<f64>::from_fn(2, 2, |i, j| if i == j { 2.0 } else { 1.0 });
        let ev = m.sym_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_match_trace_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [3, 10, 62] {
            let m = random_sym(n, &mut rng);
            let ev = m.sym_eigenvalues();
            let tr: f64 = ev.iter().sum();
            assert!((tr - m.trace()).abs() < 1e-10);
            let fro2: f64 = ev.iter().map(|v| v * v).sum();
            assert!((fro2 - m.dot(&m)).abs() < 1e-9);
            // shifted matrix loses definiteness exactly at the smallest eigenvalue
            let mut shifted = m.clone();
            for i in 0..n {
                shifted[(i, i)] -= ev[0] - 1e-8;
            }
            assert!(shifted.cholesky().is_ok());
            for i in 0..n {
                shifted[(i, i)] -= 2e-6;
            }
            assert!(shifted.cholesky().is_err());
        }
    }
}
