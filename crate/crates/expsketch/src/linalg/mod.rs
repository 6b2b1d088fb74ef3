//! Minimal dense/sparse matrix substrate: CSR sparse matrices, row-major
//! dense matrices, entrywise and row-wise p-norms, thin Householder QR,
//! triangular solves, and Matrix Market I/O.

mod mtx;
mod qr;

pub use mtx::{
    read_dense_matrix_market, read_sparse_matrix_market, read_vector_text,
    write_dense_matrix_market, write_sparse_matrix_market, write_vector_text,
};
pub use qr::{apply_r_inverse, cholesky, qr_thin, solve_upper, solve_upper_transpose};
pub(crate) use qr::{least_squares_inplace, solve_lower_into, solve_upper_transpose_into};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row; explicitly stored zeros are allowed but generators never
/// produce them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::DimensionMismatch(format!(
                "row_offsets has length {} for {} rows",
                row_offsets.len(),
                n_rows
            )));
        }
        if *row_offsets.last().unwrap() != values.len() || col_indices.len() != values.len() {
            return Err(Error::DimensionMismatch(
                "offsets, indices, and values disagree on nnz".into(),
            ));
        }
        for i in 0..n_rows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(Error::DimensionMismatch(format!(
                    "row_offsets not monotone at row {i}"
                )));
            }
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::IndexOutOfRange(format!(
                        "column indices not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&last) = cols.last() {
                if last >= n_cols {
                    return Err(Error::IndexOutOfRange(format!(
                        "column {last} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets in any order. Duplicate
    /// coordinates are rejected.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<&(usize, usize, f64)> = triplets.iter().collect();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for &&(r, c, v) in &sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfRange(format!(
                    "entry ({r}, {c}) outside {n_rows} x {n_cols}"
                )));
            }
            if prev == Some((r, c)) {
                return Err(Error::IndexOutOfRange(format!("duplicate entry ({r}, {c})")));
            }
            prev = Some((r, c));
            row_offsets[r + 1] += 1;
            col_indices.push(c);
            values.push(v);
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(m.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..m.n_rows {
            for j in 0..m.n_cols {
                let v = m.at(i, j);
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix {
            n_rows: m.n_rows,
            n_cols: m.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                *out.at_mut(i, c) = v;
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        let mut out = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            out[i] = acc;
        }
        out
    }

    /// Entrywise p-norm over stored values.
    pub fn elementwise_pnorm(&self, p: f64) -> Result<f64> {
        vec_pnorm(&self.values, p)
    }

    /// p-norm of each row.
    pub fn row_pnorms(&self, p: f64) -> Result<Vec<f64>> {
        check_norm_p(p)?;
        Ok((0..self.n_rows)
            .map(|i| pnorm_unchecked(self.row(i).1, p))
            .collect())
    }

    /// Splits off column `j`: returns the matrix without that column
    /// (columns reindexed) and column `j` densely.
    pub fn drop_column(&self, j: usize) -> Result<(SparseMatrix, Vec<f64>)> {
        if j >= self.n_cols {
            return Err(Error::IndexOutOfRange(format!(
                "column {j} of {} columns",
                self.n_cols
            )));
        }
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut dropped = vec![0.0; self.n_rows];
        row_offsets.push(0);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c == j {
                    dropped[i] = v;
                } else {
                    col_indices.push(if c > j { c - 1 } else { c });
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Ok((
            SparseMatrix {
                n_rows: self.n_rows,
                n_cols: self.n_cols - 1,
                row_offsets,
                col_indices,
                values,
            },
            dropped,
        ))
    }
}

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        DenseMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n_rows = rows.len();
        let n_cols = if n_rows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix {
            n_rows,
            n_cols,
            data,
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        (0..self.n_rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for j in 0..src.len() {
                    dst[j] += a * src[j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                *out.at_mut(j, i) = self.at(i, j);
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn elementwise_pnorm(&self, p: f64) -> Result<f64> {
        vec_pnorm(&self.data, p)
    }

    pub fn row_pnorms(&self, p: f64) -> Result<Vec<f64>> {
        check_norm_p(p)?;
        Ok((0..self.n_rows)
            .map(|i| pnorm_unchecked(self.row(i), p))
            .collect())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_norm_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "p-norm requires p >= 1 or infinity, got {p}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn pnorm_unchecked(v: &[f64], p: f64) -> f64 {
    if p == f64::INFINITY {
        v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    } else if p == 2.0 {
        v.iter().map(|&x| x * x).sum::<f64>().sqrt()
    } else if p == 1.0 {
        v.iter().map(|&x| x.abs()).sum()
    } else {
        v.iter().map(|&x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Sum of |v_i|^p, the p-th power of the p-norm. Requires finite p.
#[inline]
pub(crate) fn abs_pow_sum(v: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        v.iter().map(|&x| x * x).sum()
    } else if p == 1.0 {
        v.iter().map(|&x| x.abs()).sum()
    } else {
        v.iter().map(|&x| x.abs().powf(p)).sum()
    }
}

/// The lp norm of a vector, for p >= 1 or p = infinity.
pub fn vec_pnorm(v: &[f64], p: f64) -> Result<f64> {
    check_norm_p(p)?;
    Ok(pnorm_unchecked(v, p))
}

/// Dual exponent: 1/p + 1/q = 1.
pub(crate) fn dual_exponent(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p == f64::INFINITY {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Number of leading values each leaf of the fixed reduction tree covers.
pub(crate) const REDUCE_LEAF: usize = 64;

/// Sums a slice in a fixed, size-derived order: split-in-half recursion down
/// to runs of at most [`REDUCE_LEAF`] values, which are summed left to
/// right. Partial sums over aligned subranges combine to exactly the same
/// floating-point value as a whole-slice sum, which is what makes the
/// distributed reductions reproduce centralized results bit for bit.
pub(crate) fn tree_sum(v: &[f64]) -> f64 {
    if v.len() <= REDUCE_LEAF {
        return v.iter().sum();
    }
    let mid = v.len().div_ceil(2);
    tree_sum(&v[..mid]) + tree_sum(&v[mid..])
}

/// Combines per-machine partial values in the same fixed tree order as
/// [`tree_sum`] applied to the concatenation of their inputs (when the
/// machine ranges are the halving-aligned pieces of the whole range).
pub(crate) fn tree_combine_scalars(parts: &[f64]) -> f64 {
    if parts.len() == 1 {
        return parts[0];
    }
    let mid = parts.len().div_ceil(2);
    tree_combine_scalars(&parts[..mid]) + tree_combine_scalars(&parts[mid..])
}

/// Same fixed-order combination for dense matrix partials.
pub(crate) fn tree_combine_matrices(parts: Vec<DenseMatrix>) -> DenseMatrix {
    fn rec(parts: &mut [Option<DenseMatrix>]) -> DenseMatrix {
        if parts.len() == 1 {
            return parts[0].take().unwrap();
        }
        let mid = parts.len().div_ceil(2);
        let (l, r) = parts.split_at_mut(mid);
        let mut left = rec(l);
        let right = rec(r);
        left.add_assign(&right);
        left
    }
    assert!(!parts.is_empty());
    let mut parts: Vec<Option<DenseMatrix>> = parts.into_iter().map(Some).collect();
    rec(&mut parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randsource::Stream;

    #[test]
    fn pnorm_point_values() {
        assert_eq!(vec_pnorm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(vec_pnorm(&[1.0, -1.0, 1.0], 1.0).unwrap(), 3.0);
        assert_eq!(vec_pnorm(&[2.0, -7.0, 1.0], f64::INFINITY).unwrap(), 7.0);
        assert!(vec_pnorm(&[1.0], 0.5).is_err());
        assert!(vec_pnorm(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn norm_nesting_for_low_p() {
        // ||z||_2 <= ||z||_p <= m^(1/p - 1/2) ||z||_2 for p in [1, 2).
        let mut s = Stream::new(11, "nesting");
        for _ in 0..1000 {
            let m = 1 + (s.next_u64() % 20) as usize;
            let z: Vec<f64> = (0..m).map(|_| s.next_f64() * 2.0 - 1.0).collect();
            for p in [1.0, 1.3, 1.7, 1.99] {
                let n2 = vec_pnorm(&z, 2.0).unwrap();
                let np = vec_pnorm(&z, p).unwrap();
                let factor = (m as f64).powf(1.0 / p - 0.5);
                assert!(np >= n2 - 1e-12 * n2);
                assert!(np <= factor * n2 + 1e-12 * n2);
            }
        }
    }

    #[test]
    fn csr_construction_and_validation() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (0, 0, -1.0), (1, 1, 2.0)])
            .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[0usize, 2][..], &[-1.0, 1.5][..]));
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![0.5, 2.0]);
        assert!(SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, 3, &[(5, 0, 1.0)]).is_err());
        // strictly increasing column indices enforced in new()
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn elementwise_and_row_norms() {
        let eye = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert!((eye.elementwise_pnorm(1.5).unwrap() - 2.0f64.powf(1.0 / 1.5)).abs() < 1e-15);
        let mut s = Stream::new(5, "flat");
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| s.next_f64() - 0.5).collect())
            .collect();
        let d = DenseMatrix::from_rows(&rows);
        let flat: Vec<f64> = d.data.clone();
        for p in [1.0, 2.0, 3.5] {
            assert!(
                (d.elementwise_pnorm(p).unwrap() - vec_pnorm(&flat, p).unwrap()).abs() < 1e-12
            );
        }
        let rp = d.row_pnorms(2.0).unwrap();
        for (i, r) in rows.iter().enumerate() {
            assert!((rp[i] - vec_pnorm(r, 2.0).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn drop_column_splits_correctly() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 0, 1.0), (0, 1, 2.0), (0, 2, 3.0), (1, 1, 4.0)],
        )
        .unwrap();
        let (rest, col) = m.drop_column(1).unwrap();
        assert_eq!(col, vec![2.0, 4.0]);
        assert_eq!(rest.n_cols, 2);
        assert_eq!(rest.row(0), (&[0usize, 1][..], &[1.0, 3.0][..]));
        assert_eq!(rest.row(1), (&[][..], &[][..]));
    }

    #[test]
    fn tree_sum_matches_plain_sum_and_composes() {
        let mut s = Stream::new(77, "tree");
        let v: Vec<f64> = (0..1000).map(|_| s.next_f64() - 0.5).collect();
        let plain: f64 = v.iter().sum();
        let tree = tree_sum(&v);
        assert!((tree - plain).abs() < 1e-12 * plain.abs().max(1.0));
        // Halving-aligned partials combine to the identical bits.
        let mid = v.len().div_ceil(2);
        let combined = tree_combine_scalars(&[tree_sum(&v[..mid]), tree_sum(&v[mid..])]);
        assert_eq!(combined.to_bits(), tree.to_bits());
        let q1 = mid.div_ceil(2);
        let rest = mid + (v.len() - mid).div_ceil(2);
        let four = tree_combine_scalars(&[
            tree_sum(&v[..q1]),
            tree_sum(&v[q1..mid]),
            tree_sum(&v[mid..rest]),
            tree_sum(&v[rest..]),
        ]);
        assert_eq!(four.to_bits(), tree.to_bits());
    }

    #[test]
    fn dense_matmul_and_transpose() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.data, vec![2.0, 1.0, 4.0, 3.0]);
        assert_eq!(a.transpose().data, vec![1.0, 3.0, 2.0, 4.0]);
    }
}
