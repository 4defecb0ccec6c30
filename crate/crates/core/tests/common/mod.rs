#![allow(dead_code)]

use lindblad_steady::algebra::{vectorize, ComplexMatrix, C64, ONE, ZERO};
use lindblad_steady::lindblad::{build_liouvillian, Jump, LindbladModel, Superoperator};
use lindblad_steady::models;
use lindblad_steady::scenarios::{sample_state, RandomStateSampler, SamplerKind};
use lindblad_steady::state::DensityMatrix;
use lindblad_steady::steady::SteadyStateBasis;

pub fn balanced() -> Superoperator {
    build_liouvillian(&models::two_qubit_balanced(1.0).unwrap())
}

pub fn single_decay() -> Superoperator {
    build_liouvillian(&models::two_qubit_single_decay(1.0).unwrap())
}

pub fn driven(omega: f64, gamma: f64) -> Superoperator {
    build_liouvillian(&models::two_qubit_driven(omega, gamma).unwrap())
}

pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[&[0., 0.], &[1., 0.]]).unwrap()
}

/// One qubit, `L = σ₋`; basis `|e⟩, |g⟩`.
pub fn qubit_decay(gamma: f64) -> Superoperator {
    build_liouvillian(&LindbladModel::dissipative(2, vec![Jump::new(sigma_minus(), gamma)]).unwrap())
}

pub fn states(seed: u64, dim: usize, count: usize) -> Vec<DensityMatrix> {
    let mut s = RandomStateSampler::new(seed, SamplerKind::MixedGinibre);
    (0..count).map(|_| sample_state(&mut s, dim).unwrap()).collect()
}

pub fn pure_states(seed: u64, dim: usize, count: usize) -> Vec<DensityMatrix> {
    let mut s = RandomStateSampler::new(seed, SamplerKind::PureHaar);
    (0..count).map(|_| sample_state(&mut s, dim).unwrap()).collect()
}

pub fn basis_vector(dim: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[k] = ONE;
    v
}

pub fn projector(v: &[C64]) -> ComplexMatrix {
    ComplexMatrix::outer(v, v)
}

/// Distance of `m` (vectorized) from the span of the right kernel vectors.
pub fn distance_from_right_span(basis: &SteadyStateBasis, m: &ComplexMatrix) -> f64 {
    let x = vectorize(m).unwrap();
    let mut r: Vec<C64> = x.as_slice().to_vec();
    for v in basis.right_vectors() {
        let c = v.dot(&x);
        for (a, b) in r.iter_mut().zip(v.as_slice()) {
            *a -= c * b;
        }
    }
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Distance of `m` from the span of the left vectors (conserved quantities),
/// using a Gram–Schmidt copy of them.
pub fn distance_from_left_span(basis: &SteadyStateBasis, m: &ComplexMatrix) -> f64 {
    let mut ortho: Vec<Vec<C64>> = Vec::new();
    for u in basis.left_vectors() {
        let mut w = u.as_slice().to_vec();
        for q in &ortho {
            let c: C64 = q.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (a, b) in w.iter_mut().zip(q) {
                *a -= c * b;
            }
        }
        let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ortho.push(w.iter().map(|z| z / n).collect());
    }
    let mut r = vectorize(m).unwrap().into_vec();
    for q in &ortho {
        let c: C64 = q.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
        for (a, b) in r.iter_mut().zip(q) {
            *a -= c * b;
        }
    }
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn mix(a: &DensityMatrix, b: &DensityMatrix, alpha: f64) -> DensityMatrix {
    DensityMatrix::symmetrized(&(&a.matrix().scale_real(alpha) + &b.matrix().scale_real(1.0 - alpha))).unwrap()
}

pub fn assert_valid(rho: &DensityMatrix) {
    let v = rho.validity().unwrap();
    assert!(v.trace_error <= 1e-12, "trace error {}", v.trace_error);
    assert!(v.asymmetry <= 1e-12, "asymmetry {}", v.asymmetry);
    assert!(v.min_eigenvalue >= -1e-8, "min eigenvalue {}", v.min_eigenvalue);
}
