//! Complex dense and sparse linear algebra.
//!
//! Matrices are stored column-major, and vectorization stacks columns, so
//! `vec(A B C) = (Cᵀ ⊗ A) vec(B)` holds for every product assembled here.

mod decomp;
mod solve;
mod sparse;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decomp::{condition_number, eig, eigh, svd, Eigen, HermitianEigen, Svd};
pub use solve::{gmres, solve_linear, Operator, SolveMethod, SolveOptions, SolveReport};
pub use sparse::SparseOperator;

pub type C64 = num_complex::Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense complex matrix in column-major order.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> =
            rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub(crate) fn from_faer(m: MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub(crate) fn as_faer(&self) -> MatRef<'_, C64> {
        MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_column_major(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖A − A†‖_F`
    pub fn hermitian_asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Hermitian to within an absolute Frobenius tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_asymmetry() <= tol
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let out = self.as_faer() * rhs.as_faer();
        Ok(Self::from_faer(out.as_ref()))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        let mut y = vec![ZERO; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            for (yi, &a) in y.iter_mut().zip(self.column(j)) {
                *yi += a * xj;
            }
        }
        y
    }

    /// `[A, B] = AB − BA`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    /// `⟨u|A|v⟩`
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> C64 {
        let av = self.mul_vec(v);
        u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum()
    }

    /// Frobenius inner product `tr(A† B)`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>9.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

macro_rules! elementwise {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                ComplexMatrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }
    };
}

elementwise!(Add, add, +);
elementwise!(Sub, sub, -);

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in matrix product")
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Column-stacked `D²` vector of a `D×D` operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorizedState {
    entries: Vec<C64>,
}

impl VectorizedState {
    pub fn new(entries: Vec<C64>) -> Self {
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: vec![ZERO; dim] }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.entries
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.entries
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.entries
    }

    /// Conjugate-linear in `self`: `self† · other`.
    pub fn dot(&self, other: &Self) -> C64 {
        dot(&self.entries, &other.entries)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.entries)
    }
}

/// Stacks the columns of a square matrix.
pub fn vectorize(m: &ComplexMatrix) -> Result<VectorizedState> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "cannot vectorize non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    Ok(VectorizedState { entries: m.data.clone() })
}

/// Inverse of [`vectorize`]; the length must be a perfect square.
pub fn devectorize(v: &VectorizedState) -> Result<ComplexMatrix> {
    let d = integer_sqrt(v.dim())
        .ok_or_else(|| Error::Dimension(format!("length {} is not a perfect square", v.dim())))?;
    ComplexMatrix::from_column_major(d, d, v.entries.clone())
}

pub(crate) fn integer_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Dense Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    ComplexMatrix::from_fn(a.rows * br, a.cols * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
