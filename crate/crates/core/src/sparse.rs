//! Compressed sparse row matrices with `f64` weights.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows above this count are multiplied in parallel by [`SparseMatrix::spmm`].
const PARALLEL_ROWS: usize = 2048;

/// CSR matrix. Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating the structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 {
            return Err(Error::Shape(format!(
                "indptr has length {}, expected {}",
                indptr.len(),
                rows + 1
            )));
        }
        if indices.len() != values.len() || indptr[rows] != indices.len() || indptr[0] != 0 {
            return Err(Error::Shape("inconsistent CSR arrays".into()));
        }
        for r in 0..rows {
            let (lo, hi) = (indptr[r], indptr[r + 1]);
            if lo > hi {
                return Err(Error::Shape(format!("row {r} has decreasing offsets")));
            }
            let row = &indices[lo..hi];
            for (k, &c) in row.iter().enumerate() {
                if c >= cols {
                    return Err(Error::Range(format!(
                        "column {c} in row {r} exceeds {cols}"
                    )));
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(Error::Shape(format!(
                        "row {r} column indices not strictly increasing"
                    )));
                }
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite weight {v}")));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, weight)` triplets. Duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::Range(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, w) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += w;
                continue;
            }
            indices.push(c);
            values.push(w);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self::from_csr(rows, cols, indptr, indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Dense matrix to CSR, keeping exact non-zeros only.
    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Result<Self> {
        let (rows, cols) = dense.dim();
        let trip = dense
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((r, c), &v)| (r, c, v));
        Self::from_triplets(rows, cols, trip)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices of row `r`.
    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_indices(r)
            .iter()
            .copied()
            .zip(self.row_values(r).iter().copied())
    }

    /// Number of stored entries per row.
    pub fn row_nnz(&self) -> Vec<usize> {
        self.indptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row_values(r).iter().sum())
            .collect()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.row_indices(r).binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row_indices(r).binary_search(&c).is_ok()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr: counts,
            indices,
            values,
        }
    }

    /// Same sparsity pattern with every stored weight set to one.
    pub fn pattern(&self) -> Self {
        Self {
            values: vec![1.0; self.nnz()],
            ..self.clone()
        }
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && *self == self.transpose()
    }

    /// `A + I`. Existing diagonal entries are incremented by one.
    pub fn add_self_loops(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Shape(format!(
                "self loops need a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let trip = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .chain((0..self.rows).map(|i| (i, i, 1.0)));
        Self::from_triplets(self.rows, self.cols, trip)
    }

    /// Scales every row by `1 / row_sum`; rows summing to zero are left as they are.
    pub fn row_normalize(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
            let s: f64 = self.values[lo..hi].iter().sum();
            if s != 0.0 {
                for v in &mut out.values[lo..hi] {
                    *v /= s;
                }
            }
        }
        out
    }

    /// `D^{-1/2} A D^{-1/2}` with `D` the row sums. Zero-degree rows stay empty.
    pub fn sym_normalize(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Shape(
                "symmetric normalisation needs a square matrix".into(),
            ));
        }
        if self.values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "symmetric normalisation of a matrix with negative entries".into(),
            ));
        }
        let inv_sqrt: Vec<f64> = self
            .row_sums()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let mut out = self.clone();
        for r in 0..self.rows {
            let lo = self.indptr[r];
            for (k, c) in self.row_indices(r).iter().enumerate() {
                out.values[lo + k] *= inv_sqrt[r] * inv_sqrt[*c];
            }
        }
        Ok(out)
    }

    /// `I - self`, stored on the union of the diagonal and the support.
    pub fn identity_minus(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Shape("identity_minus needs a square matrix".into()));
        }
        let trip = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, -v)))
            .chain((0..self.rows).map(|i| (i, i, 1.0)));
        Self::from_triplets(self.rows, self.cols, trip)
    }

    /// Entry-wise product with `other`, evaluated on `self`'s support.
    pub fn hadamard(&self, other: &SparseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "hadamard of {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let trip = (0..self.rows).flat_map(|r| {
            self.row(r)
                .map(move |(c, v)| (r, c, v * other.get(r, c)))
                .filter(|&(_, _, v)| v != 0.0)
        });
        Self::from_triplets(self.rows, self.cols, trip)
    }

    /// Multiplies every stored value by `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            let lo = self.indptr[r];
            for (k, c) in self.row_indices(r).iter().enumerate() {
                out.values[lo + k] = f(r, *c, self.values[lo + k]);
            }
        }
        out
    }

    /// Sparse times dense: `self (r x c) * dense (c x d)`.
    pub fn spmm(&self, dense: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.cols {
            return Err(Error::Shape(format!(
                "spmm of {}x{} sparse with {}x{} dense",
                self.rows,
                self.cols,
                dense.nrows(),
                dense.ncols()
            )));
        }
        let mut out = Array2::zeros((self.rows, dense.ncols()));
        let kernel = |(r, mut out_row): (usize, ndarray::ArrayViewMut1<'_, f64>)| {
            for (c, w) in self.row(r) {
                out_row.scaled_add(w, &dense.row(c));
            }
        };
        if self.rows >= PARALLEL_ROWS {
            out.axis_iter_mut(Axis(0))
                .into_par_iter()
                .enumerate()
                .for_each(kernel);
        } else {
            out.axis_iter_mut(Axis(0)).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `self^T * dense` without materialising the transpose.
    pub fn spmm_transpose(&self, dense: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.rows {
            return Err(Error::Shape(format!(
                "transposed spmm of {}x{} sparse with {}x{} dense",
                self.rows,
                self.cols,
                dense.nrows(),
                dense.ncols()
            )));
        }
        let mut out = Array2::zeros((self.cols, dense.ncols()));
        for r in 0..self.rows {
            let src = dense.row(r);
            for (c, w) in self.row(r) {
                out.row_mut(c).scaled_add(w, &src);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn triangle() -> SparseMatrix {
        SparseMatrix::from_triplets(
            3,
            3,
            [
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 2, 1.0),
                (2, 1, 1.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 3, [(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn rejects_unsorted_rows() {
        let err = SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn two_cycle_row_normalize() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let n = a.row_normalize();
        assert_eq!(n.get(0, 1), 1.0);
        assert_eq!(n.get(1, 0), 1.0);
    }

    #[test]
    fn triangle_sym_normalize() {
        let n = triangle().sym_normalize().unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 0.0 } else { 0.5 };
                assert!((n.get(r, c) - expect).abs() < 1e-15);
            }
        }
        assert!(n.is_symmetric());
    }

    #[test]
    fn sym_normalize_rejects_negative() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 1, -1.0)]).unwrap();
        assert!(matches!(a.sym_normalize(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn self_loops_on_empty_graph_is_identity() {
        let a = SparseMatrix::zeros(4, 4).add_self_loops().unwrap();
        assert_eq!(a, SparseMatrix::identity(4));
    }

    #[test]
    fn zero_rows_survive_normalisation() {
        let a = SparseMatrix::from_triplets(3, 3, [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let r = a.row_normalize();
        let s = a.sym_normalize().unwrap();
        assert_eq!(r.row_nnz()[2], 0);
        assert_eq!(s.row_nnz()[2], 0);
    }

    #[test]
    fn spmm_identity_is_exact() {
        let x = array![[1.5, -2.0], [0.25, 3.0], [7.0, 0.0]];
        let y = SparseMatrix::identity(3).spmm(x.view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn spmm_transpose_matches_explicit_transpose() {
        let a =
            SparseMatrix::from_triplets(3, 2, [(0, 1, 2.0), (2, 0, -1.0), (1, 1, 0.5)]).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let lhs = a.spmm_transpose(x.view()).unwrap();
        let rhs = a.transpose().spmm(x.view()).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn spmm_shape_error() {
        let x = Array2::<f64>::zeros((2, 2));
        assert!(matches!(triangle().spmm(x.view()), Err(Error::Shape(_))));
    }
}
