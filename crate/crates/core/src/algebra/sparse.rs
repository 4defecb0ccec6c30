use faer::sparse::{SparseColMat, Triplet};

use super::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Compressed sparse column operator assembled from `(row, col, value)`
/// triplets. Duplicates are summed and exact zeros dropped; entries are
/// sorted by column, then row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseOperator {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, C64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::Dimension(format!(
                "triplet ({r}, {c}) out of range for {rows}x{cols} operator"
            )));
        }
        entries.sort_by_key(|&(r, c, _)| (c, r));

        let mut col_ptr = vec![0usize; cols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        let mut cols_of = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                row_idx.push(r);
                values.push(v);
                cols_of.push(c);
                last = Some((r, c));
            }
        }

        let mut kept_rows = Vec::with_capacity(row_idx.len());
        let mut kept_vals = Vec::with_capacity(values.len());
        for ((r, v), c) in row_idx.into_iter().zip(values).zip(cols_of) {
            if v != ZERO {
                kept_rows.push(r);
                kept_vals.push(v);
                col_ptr[c + 1] += 1;
            }
        }
        for c in 0..cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        Ok(Self { rows, cols, col_ptr, row_idx: kept_rows, values: kept_vals })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, col_ptr: vec![0; cols + 1], row_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, C64::new(1.0, 0.0))
    }

    pub fn scaled_identity(n: usize, s: C64) -> Self {
        if s == ZERO {
            return Self::zeros(n, n);
        }
        Self { rows: n, cols: n, col_ptr: (0..=n).collect(), row_idx: (0..n).collect(), values: vec![s; n] }
    }

    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let triplets = (0..m.cols())
            .flat_map(|j| (0..m.rows()).map(move |i| (i, j)))
            .filter_map(|(i, j)| (m[(i, j)] != ZERO).then(|| (i, j, m[(i, j)])));
        Self::from_triplets(m.rows(), m.cols(), triplets).expect("indices come from the matrix")
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries in column-then-row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.cols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// `y ← A x`
    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        assert_eq!(y.len(), self.rows, "output length mismatch");
        y.fill(ZERO);
        for (c, &xc) in x.iter().enumerate() {
            if xc == ZERO {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
            .expect("transposed indices stay in range")
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.rows, self.cols, self.triplets().map(|(r, c, v)| (r, c, v * s)))
            .expect("indices unchanged")
    }

    /// `self + s·other`
    pub fn add_scaled(&self, other: &Self, s: C64) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension("sparse sum of different shapes".into()));
        }
        Self::from_triplets(
            self.rows,
            self.cols,
            self.triplets().chain(other.triplets().map(|(r, c, v)| (r, c, v * s))),
        )
    }

    /// Sparse Kronecker product `a ⊗ b`.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let triplets = a.triplets().flat_map(|(ar, ac, av)| {
            b.triplets().map(move |(br, bc, bv)| (ar * b.rows + br, ac * b.cols + bc, av * bv))
        });
        Self::from_triplets(a.rows * b.rows, a.cols * b.cols, triplets).expect("kron indices in range")
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn to_faer(&self) -> Result<SparseColMat<usize, C64>> {
        let triplets: Vec<_> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &triplets)
            .map_err(|e| Error::Numerical(format!("sparse assembly failed: {e:?}")))
    }
}
