use faer::Side;

use super::{norm, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// `m = U Σ V†` with singular values sorted in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl Svd {
    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Indices of singular values `σ ≤ tol_null · σ_max`. An all-zero matrix
    /// has every singular value in the null set.
    pub fn null_indices(&self, tol_null: f64) -> Vec<usize> {
        let cutoff = tol_null * self.max_singular_value();
        self.singular_values
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s <= cutoff)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.singular_values.len();
        let us = ComplexMatrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * self.singular_values[j]);
        let vk = ComplexMatrix::from_fn(self.v.rows(), k, |i, j| self.v[(i, j)]);
        &us * &vk.adjoint()
    }
}

pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    let dec = m.as_faer().svd().map_err(|e| {
        Error::Numerical(format!(
            "SVD of {}x{} matrix did not converge ({e:?}); Frobenius norm {:.3e}",
            m.rows(),
            m.cols(),
            m.frobenius_norm()
        ))
    })?;
    let singular_values = dec.S().column_vector().iter().map(|s| s.re).collect();
    Ok(Svd { u: ComplexMatrix::from_faer(dec.U()), singular_values, v: ComplexMatrix::from_faer(dec.V()) })
}

/// 2-norm condition number `σ_max / σ_min`.
pub fn condition_number(m: &ComplexMatrix) -> Result<f64> {
    let s = m
        .as_faer()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular values did not converge ({e:?})")))?;
    let max = s.first().copied().unwrap_or(0.0);
    let min = s.last().copied().unwrap_or(0.0);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

/// Eigendecomposition `m T = T diag(Λ)` with unit-norm eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: ComplexMatrix,
    /// Condition number of `T`; 1 for Hermitian input.
    pub condition: f64,
}

/// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors unitary.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

pub fn eigh(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::Dimension("eigendecomposition needs a square matrix".into()));
    }
    let h = m.hermitian_part();
    let dec = h
        .as_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver failed ({e:?})")))?;
    let values = dec.S().column_vector().iter().map(|z| z.re).collect();
    Ok(HermitianEigen { values, vectors: ComplexMatrix::from_faer(dec.U()) })
}

/// General eigendecomposition. Hermitian input is routed through the
/// Hermitian solver so that the spectrum is real and `T` is unitary.
pub fn eig(m: &ComplexMatrix) -> Result<Eigen> {
    if !m.is_square() {
        return Err(Error::Dimension("eigendecomposition needs a square matrix".into()));
    }
    let scale = m.frobenius_norm().max(1.0);
    if m.hermitian_asymmetry() <= 1e-12 * scale {
        let h = eigh(m)?;
        return Ok(Eigen {
            values: h.values.iter().map(|&x| C64::new(x, 0.0)).collect(),
            vectors: h.vectors,
            condition: 1.0,
        });
    }
    let dec = m
        .as_faer()
        .eigen()
        .map_err(|e| Error::Numerical(format!("eigensolver failed ({e:?})")))?;
    let values: Vec<C64> = dec.S().column_vector().iter().copied().collect();
    let mut vectors = ComplexMatrix::from_faer(dec.U());
    let n = vectors.rows();
    for j in 0..vectors.cols() {
        let nrm = norm(vectors.column(j));
        if nrm > 0.0 {
            for i in 0..n {
                vectors[(i, j)] /= nrm;
            }
        }
    }
    let condition = condition_number(&vectors)?;
    Ok(Eigen { values, vectors, condition })
}
