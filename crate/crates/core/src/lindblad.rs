//! Open-system models and their vectorized Liouvillian.
//!
//! For `dρ/dt = −i[H, ρ] + Σ_j γ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})` the
//! column-major superoperator is
//!
//! ```text
//! 𝓛 = −i(I⊗H − Hᵀ⊗I) + Σ_j (L_j*⊗L_j − ½ I⊗L_j†L_j − ½ (L_j†L_j)ᵀ⊗I)
//! ```
//!
//! with the rates folded in as `√γ_j L_j`.

use std::sync::OnceLock;

use crate::algebra::{devectorize, vectorize, ComplexMatrix, Operator, SparseOperator, C64, I, ONE};
use crate::error::{Error, Result};
use crate::state::DensityMatrix;

/// A jump operator with its nonnegative rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

impl Jump {
    pub fn new(operator: ComplexMatrix, rate: f64) -> Self {
        Self { operator, rate }
    }
}

/// Hamiltonian plus rated jump operators on a `dim`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    dim: usize,
    hamiltonian: ComplexMatrix,
    jumps: Vec<Jump>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<Jump>) -> Result<Self> {
        let dim = hamiltonian.rows();
        if dim == 0 || !hamiltonian.is_square() {
            return Err(Error::Dimension(format!(
                "Hamiltonian is {}x{}",
                hamiltonian.rows(),
                hamiltonian.cols()
            )));
        }
        let asym = hamiltonian.hermitian_asymmetry();
        let tol = 1e-12 * hamiltonian.frobenius_norm().max(1.0);
        if asym > tol {
            return Err(Error::NotHermitian { asymmetry: asym, tolerance: tol });
        }
        for (k, j) in jumps.iter().enumerate() {
            if (j.operator.rows(), j.operator.cols()) != (dim, dim) {
                return Err(Error::Dimension(format!(
                    "jump {k} is {}x{}, expected {dim}x{dim}",
                    j.operator.rows(),
                    j.operator.cols()
                )));
            }
            if !(j.rate >= 0.0) || !j.rate.is_finite() {
                return Err(Error::InvalidModel(format!("jump {k} has rate {}", j.rate)));
            }
        }
        Ok(Self { dim, hamiltonian, jumps })
    }

    /// Purely dissipative model (`H = 0`).
    pub fn dissipative(dim: usize, jumps: Vec<Jump>) -> Result<Self> {
        Self::new(ComplexMatrix::zeros(dim, dim), jumps)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Right-hand side of the master equation evaluated directly on `rho`.
    pub fn rhs(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out = self.hamiltonian.commutator(rho)?.scale(-I);
        for j in &self.jumps {
            let l = &j.operator;
            let ld = l.adjoint();
            let k = ld.matmul(l)?;
            let sandwich = l.matmul(rho)?.matmul(&ld)?;
            let anti = &k.matmul(rho)? + &rho.matmul(&k)?;
            let term = &sandwich - &anti.scale_real(0.5);
            out = &out + &term.scale_real(j.rate);
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Superoperators with at most this many rows are stored densely.
    pub dense_threshold: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { dense_threshold: 4096 }
    }
}

/// Vectorized Liouvillian acting on column-stacked density matrices.
#[derive(Debug)]
pub struct Superoperator {
    hilbert_dim: usize,
    matrix: Operator,
    adjoint: OnceLock<Operator>,
}

impl Clone for Superoperator {
    fn clone(&self) -> Self {
        Self::from_operator(self.hilbert_dim, self.matrix.clone()).expect("shape already validated")
    }
}

pub fn build_liouvillian(model: &LindbladModel) -> Superoperator {
    build_liouvillian_with(model, BuildOptions::default())
}

pub fn build_liouvillian_with(model: &LindbladModel, opts: BuildOptions) -> Superoperator {
    let d = model.dim;
    let id = SparseOperator::identity(d);
    let mut triplets: Vec<(usize, usize, C64)> = Vec::new();
    let mut push = |op: SparseOperator, s: C64| triplets.extend(op.triplets().map(|(r, c, v)| (r, c, v * s)));

    let h = SparseOperator::from_dense(&model.hamiltonian);
    if h.nnz() > 0 {
        let ht = SparseOperator::from_dense(&model.hamiltonian.transpose());
        push(SparseOperator::kron(&id, &h), -I);
        push(SparseOperator::kron(&ht, &id), I);
    }
    for j in &model.jumps {
        if j.rate == 0.0 {
            continue;
        }
        let l = j.operator.scale_real(j.rate.sqrt());
        let k = &l.adjoint() * &l;
        let ls = SparseOperator::from_dense(&l);
        let lc = SparseOperator::from_dense(&l.conj());
        push(SparseOperator::kron(&lc, &ls), ONE);
        push(SparseOperator::kron(&id, &SparseOperator::from_dense(&k)), C64::new(-0.5, 0.0));
        push(SparseOperator::kron(&SparseOperator::from_dense(&k.transpose()), &id), C64::new(-0.5, 0.0));
    }
    let n = d * d;
    let sparse = SparseOperator::from_triplets(n, n, triplets).expect("Kronecker indices are in range");
    let matrix = if n <= opts.dense_threshold { Operator::Dense(sparse.to_dense()) } else { Operator::Sparse(sparse) };
    Superoperator { hilbert_dim: d, matrix, adjoint: OnceLock::new() }
}

impl Superoperator {
    pub fn from_operator(hilbert_dim: usize, matrix: Operator) -> Result<Self> {
        let n = hilbert_dim * hilbert_dim;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::Dimension(format!(
                "superoperator for D={hilbert_dim} must be {n}x{n}, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self { hilbert_dim, matrix, adjoint: OnceLock::new() })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// `D²`
    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    pub fn is_dense(&self) -> bool {
        self.matrix.is_dense()
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        self.matrix.to_dense()
    }

    pub fn adjoint(&self) -> &Operator {
        self.adjoint.get_or_init(|| self.matrix.adjoint())
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(x)
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.mul_vec_into(x, y)
    }

    /// `devec(𝓛 vec(ρ))`
    pub fn apply(&self, rho: &DensityMatrix) -> Result<ComplexMatrix> {
        self.apply_matrix(rho.matrix())
    }

    pub fn apply_matrix(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        if m.rows() != self.hilbert_dim || m.cols() != self.hilbert_dim {
            return Err(Error::Dimension(format!(
                "operand is {}x{}, superoperator acts on {}x{}",
                m.rows(),
                m.cols(),
                self.hilbert_dim,
                self.hilbert_dim
            )));
        }
        let v = vectorize(m)?;
        devectorize(&crate::algebra::VectorizedState::new(self.mul_vec(v.as_slice())))
    }

    /// `‖𝓛 vec(ρ)‖₂`
    pub fn residual(&self, rho: &ComplexMatrix) -> Result<f64> {
        Ok(self.apply_matrix(rho)?.frobenius_norm())
    }

    /// `‖𝓛 − 𝓛†‖_F`
    pub fn hermitian_asymmetry(&self) -> f64 {
        match &self.matrix {
            Operator::Dense(m) => m.hermitian_asymmetry(),
            Operator::Sparse(s) => s
                .add_scaled(&s.adjoint(), C64::new(-1.0, 0.0))
                .map(|d| d.frobenius_norm())
                .unwrap_or(f64::INFINITY),
        }
    }

    /// `‖𝓛 − 𝓛†‖_F ≤ 1e-10 ‖𝓛‖_F`
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_asymmetry() <= 1e-10 * self.matrix.frobenius_norm()
    }

    /// `‖𝓛† vec(I)‖₂`, zero for trace-preserving generators.
    pub fn trace_preservation_residual(&self) -> f64 {
        let id = vectorize(&ComplexMatrix::identity(self.hilbert_dim)).expect("square");
        crate::algebra::norm(&self.adjoint().mul_vec(id.as_slice()))
    }

    /// Largest real part in the spectrum (dense storage only). Logs a warning
    /// when it exceeds `1e-9`; this is advisory.
    pub fn max_real_eigenvalue(&self) -> Result<Option<f64>> {
        let Operator::Dense(m) = &self.matrix else {
            return Ok(None);
        };
        let values = crate::algebra::eig(m)?.values;
        let max = values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if max > 1e-9 {
            log::warn!("Liouvillian has an eigenvalue with real part {max:.3e} > 0");
        }
        Ok(Some(max))
    }
}
