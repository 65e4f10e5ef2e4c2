//! Compressed sparse row matrices.
//!
//! Used for normalized adjacency operators and for the typed-edge
//! aggregation matrices of the multi-relational encoder. These matrices are
//! constants of a training run: gradients flow through them, never to them.

use super::scalar::Scalar;
use super::tensor::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds from (row, col, value) triplets; duplicates are summed,
    /// exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(u32, u32, T)]) -> Self {
        let mut sorted: Vec<(u32, u32, T)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        // merge duplicates, then drop zeros
        let mut merged: Vec<(u32, u32, T)> = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            assert!((r as usize) < rows && (c as usize) < cols, "index out of range");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2 + v,
                _ => merged.push((r, c, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != T::zero());

        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            rows,
            cols,
            row_ptr,
            col_idx: merged.iter().map(|&(_, c, _)| c).collect(),
            vals: merged.iter().map(|&(_, _, v)| v).collect(),
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            vals: vec![T::one(); n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterate entries of one row as (col, value).
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (u32, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.vals[k]))
    }

    /// Sparse-dense product `self * x`.
    pub fn matmul_dense(&self, x: &Tensor2<T>) -> Tensor2<T> {
        assert_eq!(self.cols, x.rows(), "spmm shape mismatch");
        let d = x.cols();
        let mut out = Tensor2::zeros(self.rows, d);
        for r in 0..self.rows {
            let dst_range = r * d..(r + 1) * d;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                let v = self.vals[k];
                let src = x.row(c);
                let dst = &mut out.values_mut()[dst_range.clone()];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let mut col_idx = vec![0u32; self.nnz()];
        let mut vals = vec![T::zero(); self.nnz()];
        let mut next = counts.clone();
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k] as usize;
                let slot = next[c];
                next[c] += 1;
                col_idx[slot] = r as u32;
                vals[slot] = self.vals[k];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            row_ptr: counts,
            col_idx,
            vals,
        }
    }

    /// max |A - A^T| over all positions.
    pub fn max_asymmetry(&self) -> T {
        assert_eq!(self.rows, self.cols);
        let t = self.transpose();
        let mut worst = T::zero();
        for r in 0..self.rows {
            let mut a: Vec<(u32, T)> = self.row_entries(r).collect();
            let mut b: Vec<(u32, T)> = t.row_entries(r).collect();
            a.sort_by_key(|e| e.0);
            b.sort_by_key(|e| e.0);
            let (mut i, mut j) = (0, 0);
            while i < a.len() || j < b.len() {
                match (a.get(i), b.get(j)) {
                    (Some(&(ca, va)), Some(&(cb, vb))) if ca == cb => {
                        worst = worst.max((va - vb).abs());
                        i += 1;
                        j += 1;
                    }
                    (Some(&(ca, va)), Some(&(cb, _))) if ca < cb => {
                        worst = worst.max(va.abs());
                        i += 1;
                    }
                    (Some(_), Some(&(_, vb))) => {
                        worst = worst.max(vb.abs());
                        j += 1;
                    }
                    (Some(&(_, va)), None) => {
                        worst = worst.max(va.abs());
                        i += 1;
                    }
                    (None, Some(&(_, vb))) => {
                        worst = worst.max(vb.abs());
                        j += 1;
                    }
                    (None, None) => unreachable!(),
                }
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Tensor2<T> {
        let mut out = Tensor2::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.set(r, c as usize, v);
            }
        }
        out
    }
}
