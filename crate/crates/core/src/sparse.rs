//! Minimal sparse representation for the fixed model operators.
//!
//! The master-equation right-hand side multiplies a dense density matrix by
//! a handful of banded operators (H, b, b†b) thousands of times per run;
//! dense GEMM would dominate the budget at the larger truncations. Entries
//! are stored both row- and column-adjacent so that both `S·X` and `X·S`
//! stream through the column-major dense storage.

use crate::{C64, CMat, CVec};

#[derive(Debug, Clone)]
pub struct SparseMat {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseMat {
    pub fn from_dense(m: &CMat, drop_tol: f64) -> Self {
        let dim = m.nrows();
        assert_eq!(dim, m.ncols(), "sparse conversion requires a square matrix");
        let mut rows = vec![Vec::new(); dim];
        let mut cols = vec![Vec::new(); dim];
        for j in 0..dim {
            for i in 0..dim {
                let v = m[(i, j)];
                if v.norm() > drop_tol {
                    rows[i].push((j, v));
                    cols[j].push((i, v));
                }
            }
        }
        Self { dim, rows, cols }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// `S · X` into a fresh dense matrix.
    pub fn mul_dense(&self, x: &CMat) -> CMat {
        let n = self.dim;
        debug_assert_eq!(x.nrows(), n);
        let mut out = CMat::zeros(n, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.column(j);
            let mut oc = out.column_mut(j);
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for &(l, v) in &self.rows[i] {
                    acc += v * xc[l];
                }
                oc[i] = acc;
            }
        }
        out
    }

    /// `X · S` into a fresh dense matrix.
    pub fn dense_mul(&self, x: &CMat) -> CMat {
        let n = self.dim;
        debug_assert_eq!(x.ncols(), n);
        let mut out = CMat::zeros(x.nrows(), n);
        for j in 0..n {
            for &(l, v) in &self.cols[j] {
                let xc = x.column(l);
                let mut oc = out.column_mut(j);
                for i in 0..x.nrows() {
                    oc[i] += v * xc[i];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for &(l, w) in &self.rows[i] {
                acc += w * v[l];
            }
            out[i] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_products_match_dense() {
        let n = 9;
        let m = CMat::from_fn(n, n, |i, j| {
            if (i + 2 * j) % 3 == 0 {
                C64::new(i as f64 - 0.5 * j as f64, 0.3 * j as f64)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let x = CMat::from_fn(n, n, |i, j| C64::new((i * j) as f64 * 0.1, i as f64 - j as f64));
        let s = SparseMat::from_dense(&m, 0.0);
        assert!((s.mul_dense(&x) - &m * &x).norm() < 1e-12);
        assert!((s.dense_mul(&x) - &x * &m).norm() < 1e-12);
        let v = CVec::from_fn(n, |i, _| C64::new(i as f64, 1.0));
        assert!((s.mul_vec(&v) - &m * &v).norm() < 1e-12);
    }
}
