//! Density matrices and distances between them.

use crate::algebra::{devectorize, eigh, norm, vectorize, ComplexMatrix, VectorizedState, C64};
use crate::error::{Error, Result};

/// Tolerances used when accepting a matrix as a quantum state.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

#[derive(Clone, Copy, Debug)]
pub struct Validity {
    pub trace_error: f64,
    pub asymmetry: f64,
    pub min_eigenvalue: f64,
}

impl Validity {
    pub fn of(m: &ComplexMatrix) -> Result<Self> {
        let asymmetry = m.hermitian_asymmetry();
        let trace_error = (m.trace() - C64::new(1.0, 0.0)).norm();
        let min_eigenvalue = eigh(m)?.values.first().copied().unwrap_or(0.0);
        Ok(Self { trace_error, asymmetry, min_eigenvalue })
    }

    pub fn is_valid(&self) -> bool {
        self.asymmetry <= HERMITIAN_TOL && self.trace_error <= TRACE_TOL && self.min_eigenvalue >= -PSD_TOL
    }
}

impl DensityMatrix {
    /// Validates `m` as a density matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() || m.rows() == 0 {
            return Err(Error::InvalidState(format!("{}x{} is not a square state", m.rows(), m.cols())));
        }
        let v = Validity::of(&m)?;
        if !v.is_valid() {
            return Err(Error::InvalidState(format!(
                "trace error {:.2e}, asymmetry {:.2e}, minimum eigenvalue {:.2e}",
                v.trace_error, v.asymmetry, v.min_eigenvalue
            )));
        }
        Ok(Self { matrix: m })
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let n = norm(psi);
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("state vector has norm {n}")));
        }
        Ok(Self { matrix: ComplexMatrix::outer(psi, psi) })
    }

    /// `I / D`
    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    /// Hermitian part of `m` rescaled to unit trace. Positivity is not checked.
    pub fn symmetrized(m: &ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension("state must be square".into()));
        }
        let h = m.hermitian_part();
        let tr = h.trace().re;
        if !(tr.abs() > 1e-300) || !tr.is_finite() {
            return Err(Error::Numerical(format!("cannot renormalize a matrix with trace {tr}")));
        }
        Ok(Self { matrix: h.scale_real(1.0 / tr) })
    }

    /// Wraps `m` without validation; used for integrator output whose drift
    /// is measured rather than corrected.
    pub(crate) fn from_trusted(m: ComplexMatrix) -> Self {
        Self { matrix: m }
    }

    pub fn from_vectorized(v: &VectorizedState) -> Result<Self> {
        Self::new(devectorize(v)?)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn vectorized(&self) -> VectorizedState {
        vectorize(&self.matrix).expect("density matrices are square")
    }

    pub fn validity(&self) -> Result<Validity> {
        Validity::of(&self.matrix)
    }

    /// `tr(O ρ)`
    pub fn expectation(&self, op: &ComplexMatrix) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for k in 0..d {
                acc += op[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc
    }

    /// Unitary change of basis `W ρ W†`.
    pub fn transformed(&self, w: &ComplexMatrix) -> Result<Self> {
        let m = w.matmul(&self.matrix)?.matmul(&w.adjoint())?;
        Ok(Self { matrix: m })
    }
}

/// Trace norm `‖A‖₁` of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigh(m)?.values.iter().map(|x| x.abs()).sum())
}

/// `½‖ρ − σ‖₁`
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("states of dimension {} and {}", a.dim(), b.dim())));
    }
    Ok(0.5 * trace_norm(&(a.matrix() - b.matrix()))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_matrices() {
        let neg = ComplexMatrix::diagonal(&[C64::new(1.5, 0.0), C64::new(-0.5, 0.0)]);
        assert!(DensityMatrix::new(neg).is_err());
        let trace2 = ComplexMatrix::identity(2);
        assert!(DensityMatrix::new(trace2).is_err());
        assert!(DensityMatrix::from_pure(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let a = DensityMatrix::from_pure(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let b = DensityMatrix::from_pure(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 1.0).abs() < 1e-14);
        assert!(trace_distance(&a, &a).unwrap() < 1e-15);
    }

    #[test]
    fn symmetrize_restores_trace_and_hermiticity() {
        let m = ComplexMatrix::from_rows(&[
            vec![C64::new(1.0, 0.0), C64::new(0.1, 0.2)],
            vec![C64::new(0.1, -0.1), C64::new(1.0, 0.0)],
        ])
        .unwrap();
        let s = DensityMatrix::symmetrized(&m).unwrap();
        assert!(s.matrix().hermitian_asymmetry() < 1e-15);
        assert!((s.matrix().trace().re - 1.0).abs() < 1e-15);
    }
}
