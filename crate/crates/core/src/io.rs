//! JSON documents for models, states and kernel reports.
//!
//! Matrices are lists of `[row, col, re, im]` triplets; absent entries are
//! zero. Every document carries `schema_version`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::{ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::lindblad::{Jump, LindbladModel};
use crate::state::DensityMatrix;
use crate::steady::{BasisResiduals, SteadyStateBasis};

pub const SCHEMA_VERSION: u32 = 1;

/// `[row, col, re, im]`
pub type Triplet = (usize, usize, f64, f64);

/// Nonzero entries; `-0.0` is kept so a round trip is bitwise exact.
pub fn to_triplets(m: &ComplexMatrix) -> Vec<Triplet> {
    let mut out = Vec::new();
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            let z = m[(i, j)];
            if z.re.to_bits() != 0 || z.im.to_bits() != 0 {
                out.push((i, j, z.re, z.im));
            }
        }
    }
    out
}

pub fn from_triplets(rows: usize, cols: usize, triplets: &[Triplet]) -> Result<ComplexMatrix> {
    let mut m = ComplexMatrix::zeros(rows, cols);
    // assign first, add duplicates: `0.0 + -0.0` would lose the sign
    let mut seen = vec![false; rows * cols];
    for &(i, j, re, im) in triplets {
        if i >= rows || j >= cols {
            return Err(Error::Format(format!("entry ({i}, {j}) outside a {rows}x{cols} matrix")));
        }
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Format(format!("entry ({i}, {j}) is not finite")));
        }
        let z = C64::new(re, im);
        if std::mem::replace(&mut seen[j * rows + i], true) {
            m[(i, j)] += z;
        } else {
            m[(i, j)] = z;
        }
    }
    Ok(m)
}

fn check_version(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Format(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpDocument {
    pub rate: f64,
    pub triplets: Vec<Triplet>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(default)]
    pub hamiltonian: Vec<Triplet>,
    #[serde(default)]
    pub jumps: Vec<JumpDocument>,
}

impl ModelDocument {
    pub fn from_model(model: &LindbladModel, name: Option<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name,
            dim: model.dim(),
            hamiltonian: to_triplets(model.hamiltonian()),
            jumps: model
                .jumps()
                .iter()
                .map(|j| JumpDocument { rate: j.rate, triplets: to_triplets(&j.operator) })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<LindbladModel> {
        check_version(self.schema_version)?;
        if self.dim == 0 {
            return Err(Error::Format("model dimension must be positive".into()));
        }
        let h = from_triplets(self.dim, self.dim, &self.hamiltonian)?;
        let jumps = self
            .jumps
            .iter()
            .map(|j| Ok(Jump::new(from_triplets(self.dim, self.dim, &j.triplets)?, j.rate)))
            .collect::<Result<Vec<_>>>()?;
        LindbladModel::new(h, jumps)
    }
}

/// A density matrix, or a pure state given by its amplitudes `[re, im]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub schema_version: u32,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Triplet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<(f64, f64)>>,
}

impl StateDocument {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        Self::from_matrix(rho.matrix())
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        Self { schema_version: SCHEMA_VERSION, dim: m.rows(), entries: Some(to_triplets(m)), vector: None }
    }

    pub fn matrix(&self) -> Result<ComplexMatrix> {
        check_version(self.schema_version)?;
        match (&self.entries, &self.vector) {
            (Some(e), None) => from_triplets(self.dim, self.dim, e),
            (None, Some(v)) => {
                if v.len() != self.dim {
                    return Err(Error::Format(format!("vector has {} amplitudes, dim is {}", v.len(), self.dim)));
                }
                let psi: Vec<C64> = v.iter().map(|&(re, im)| C64::new(re, im)).collect();
                Ok(ComplexMatrix::outer(&psi, &psi))
            }
            _ => Err(Error::Format("state needs exactly one of `entries` or `vector`".into())),
        }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix()?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub dim: usize,
    pub entries: Vec<Triplet>,
}

impl MatrixDocument {
    pub fn new(m: &ComplexMatrix) -> Self {
        Self { dim: m.rows(), entries: to_triplets(m) }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelDocument {
    pub schema_version: u32,
    pub n: usize,
    pub right: Vec<MatrixDocument>,
    pub left: Vec<MatrixDocument>,
    pub biorthogonality_residual: f64,
    pub orthonormality_residual: f64,
    pub kernel_residual: f64,
}

impl KernelDocument {
    pub fn new(basis: &SteadyStateBasis, residuals: &BasisResiduals) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: basis.n(),
            right: basis.right_matrices().iter().map(MatrixDocument::new).collect(),
            left: crate::steady::conserved_quantities(basis).iter().map(MatrixDocument::new).collect(),
            biorthogonality_residual: residuals.biorthogonality,
            orthonormality_residual: residuals.orthonormality,
            kernel_residual: residuals.right_kernel.max(residuals.left_kernel),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<LindbladModel> {
    read_json::<ModelDocument>(path)?.to_model()
}

pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    read_json::<StateDocument>(path)?.to_state()
}
