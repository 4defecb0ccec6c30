//! Concurrence and quantum Fisher information for the differential
//! generator `G = S_z^A − S_z^B`.

use serde::Serialize;

use crate::algebra::{eig, eigh, kron, norm, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::spins::{p_of_s, SpinEnsemblePair};
use crate::state::DensityMatrix;

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Hermitian generator of a phase shift.
#[derive(Clone, Debug)]
pub struct Generator {
    matrix: ComplexMatrix,
    label: String,
}

impl Generator {
    pub fn new(matrix: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("generator must be square".into()));
        }
        let asym = matrix.hermitian_asymmetry();
        if asym > 1e-12 * matrix.frobenius_norm().max(1.0) {
            return Err(Error::NotHermitian { asymmetry: asym, tolerance: 1e-12 });
        }
        Ok(Self { matrix, label: label.into() })
    }

    /// `S_z^A − S_z^B` from an already built matrix.
    pub fn differential(matrix: ComplexMatrix) -> Result<Self> {
        Self::new(matrix, "Sz_A - Sz_B")
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QfiMethod {
    Pure,
    Mixed,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct QfiResult {
    pub value: f64,
    pub rank_used: usize,
    pub method: QfiMethod,
    /// The subtracted coherence term `Σ_{j≠k} 8p_jp_k/(p_j+p_k)|G_jk|²`.
    pub correction: f64,
}

fn sigma_y_y() -> ComplexMatrix {
    let sy = ComplexMatrix::from_rows(&[
        vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
        vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
    ])
    .expect("2x2");
    kron(&sy, &sy)
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("concurrence needs a two-qubit state, got dimension {}", rho.dim())));
    }
    let yy = sigma_y_y();
    let tilde = &(&yy * &rho.matrix().conj()) * &yy;
    let product = rho.matrix() * &tilde;
    let mut mu: Vec<f64> = eig(&product)?.values.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).clamp(0.0, 1.0))
}

/// `4 (⟨G²⟩ − ⟨G⟩²)` for a normalized vector.
pub fn qfi_pure(psi: &[C64], g: &Generator) -> Result<f64> {
    if psi.len() != g.matrix.rows() {
        return Err(Error::Dimension(format!("state of length {} vs generator {}", psi.len(), g.matrix.rows())));
    }
    let n = norm(psi);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("state vector has norm {n}")));
    }
    let gpsi = g.matrix.mul_vec(psi);
    let mean: C64 = psi.iter().zip(&gpsi).map(|(a, b)| a.conj() * b).sum();
    let second: f64 = gpsi.iter().map(|z| z.norm_sqr()).sum();
    Ok((4.0 * (second - mean.re * mean.re)).max(0.0))
}

/// QFI of a mixed state from its spectral decomposition, keeping eigenvalues
/// `p > rank_tol`. Degenerate eigenspaces are rotated to diagonalize `G`
/// inside them so the eigenbasis is fixed.
pub fn qfi_mixed(rho: &DensityMatrix, g: &Generator, rank_tol: f64) -> Result<QfiResult> {
    if rho.dim() != g.matrix.rows() {
        return Err(Error::Dimension(format!("state dimension {} vs generator {}", rho.dim(), g.matrix.rows())));
    }
    let dec = eigh(rho.matrix())?;
    let kept: Vec<usize> = (0..dec.values.len()).filter(|&k| dec.values[k] > rank_tol).collect();
    let mut p: Vec<f64> = kept.iter().map(|&k| dec.values[k]).collect();
    let mut vecs: Vec<Vec<C64>> = kept.iter().map(|&k| dec.vectors.column(k).to_vec()).collect();

    // group (ascending) eigenvalues that agree to relative 1e-10
    let mut start = 0;
    while start < p.len() {
        let mut end = start + 1;
        while end < p.len() && (p[end] - p[start]).abs() <= 1e-10 * p[end].abs().max(p[start].abs()) {
            end += 1;
        }
        if end - start > 1 {
            let block: Vec<Vec<C64>> = vecs[start..end].to_vec();
            let k = block.len();
            let gb = ComplexMatrix::from_fn(k, k, |a, b| g.matrix.sandwich(&block[a], &block[b]));
            let rot = eigh(&gb)?.vectors;
            let mean = p[start..end].iter().sum::<f64>() / k as f64;
            for c in 0..k {
                let mut v = vec![C64::new(0.0, 0.0); rho.dim()];
                for (a, bv) in block.iter().enumerate() {
                    for (x, y) in v.iter_mut().zip(bv) {
                        *x += rot[(a, c)] * y;
                    }
                }
                vecs[start + c] = v;
                p[start + c] = mean;
            }
        }
        start = end;
    }

    let gv: Vec<Vec<C64>> = vecs.iter().map(|v| g.matrix.mul_vec(v)).collect();
    let mut first = 0.0;
    for (j, v) in vecs.iter().enumerate() {
        let mean: C64 = v.iter().zip(&gv[j]).map(|(a, b)| a.conj() * b).sum();
        let second: f64 = gv[j].iter().map(|z| z.norm_sqr()).sum();
        first += p[j] * 4.0 * (second - mean.re * mean.re);
    }
    let mut correction = 0.0;
    for j in 0..vecs.len() {
        for k in 0..vecs.len() {
            if j == k {
                continue;
            }
            let gjk: C64 = vecs[j].iter().zip(&gv[k]).map(|(a, b)| a.conj() * b).sum();
            correction += 8.0 * p[j] * p[k] / (p[j] + p[k]) * gjk.norm_sqr();
        }
    }
    let value = first - correction;
    let value = if value > -1e-9 { value.max(0.0) } else { value };
    Ok(QfiResult { value, rank_used: vecs.len(), method: QfiMethod::Mixed, correction })
}

fn check_balanced(n: usize) -> Result<()> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::QuantumNumbers(format!("balanced ensembles need an even positive N, got {n}")));
    }
    Ok(())
}

/// Dicke-state QFI for balanced ensembles of `N` qubits in total.
pub fn qfi_dicke_closed(n: usize, s: usize, m: i64) -> Result<f64> {
    check_balanced(n)?;
    if s > n / 2 || m.unsigned_abs() as usize > s {
        return Err(Error::QuantumNumbers(format!("|S={s}, M={m}⟩ invalid for N = {n}")));
    }
    let (s, m, n) = (s as f64, m as f64, n as f64);
    let d = 3.0 - 4.0 * s * (1.0 + s);
    Ok((12.0 * m * m + 8.0 * s * (1.0 + s) * (s + s * s - m * m - 1.0)) / d
        + (1.0 - 2.0 * s * (1.0 + s) + 2.0 * m * m) / d * (n * n + 4.0 * n))
}

/// `(N² + 4N)/3 − (4/3) S(S+1)`
pub fn qfi_balanced_mixture_closed(n: usize, s: usize) -> Result<f64> {
    check_balanced(n)?;
    if s > n / 2 {
        return Err(Error::QuantumNumbers(format!("S = {s} exceeds N/2 = {}", n / 2)));
    }
    let (n, s) = (n as f64, s as f64);
    Ok((n * n + 4.0 * n) / 3.0 - 4.0 / 3.0 * s * (s + 1.0))
}

/// `(N² + 2N)/3`
pub fn qfi_protocol_closed(n: usize) -> Result<f64> {
    check_balanced(n)?;
    let n = n as f64;
    Ok((n * n + 2.0 * n) / 3.0)
}

/// `Σ_S p(S) F_{ρ_B,S}` from the Clebsch–Gordan weights.
pub fn qfi_protocol_sum(n: usize) -> Result<f64> {
    check_balanced(n)?;
    let pair = SpinEnsemblePair::balanced(n)?;
    p_of_s(&pair)
        .into_iter()
        .map(|(s, p)| Ok(p * qfi_balanced_mixture_closed(n, (s.twice() / 2) as usize)?))
        .sum()
}

/// `Σ_S p(S) F_{|S,−S⟩}`, the QFI of the state left by collective decay
/// from `|ψ_dif⟩` (balanced sizes).
pub fn qfi_decay_steady_closed(n: usize) -> Result<f64> {
    check_balanced(n)?;
    let pair = SpinEnsemblePair::balanced(n)?;
    p_of_s(&pair)
        .into_iter()
        .map(|(s, p)| {
            let s = (s.twice() / 2) as usize;
            Ok(p * qfi_dicke_closed(n, s, -(s as i64))?)
        })
        .sum()
}
