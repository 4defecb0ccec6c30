//! Preset models: two qubits under collective decay, and two qubit
//! ensembles on their coupled `|S, M⟩` space.
//!
//! Two-qubit basis: `|11⟩, |10⟩, |01⟩, |00⟩` with `1` the excited level.

use crate::algebra::{ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::lindblad::{Jump, LindbladModel};
use crate::spins::{collective_ops, p_of_s, CollectiveOps, CoupledSpinSpace, HalfInt, SpinEnsemblePair};
use crate::state::DensityMatrix;

pub fn two_qubit_ops() -> CollectiveOps {
    collective_ops(&SpinEnsemblePair::new(1, 1).expect("valid pair"))
}

fn check_rate(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} must be finite and nonnegative, got {x}")))
    }
}

/// `L₁ = S₋`, `L₂ = S₊` with equal rates; the Liouvillian is Hermitian.
pub fn two_qubit_balanced(gamma: f64) -> Result<LindbladModel> {
    check_rate("γ", gamma)?;
    let ops = two_qubit_ops();
    LindbladModel::dissipative(4, vec![Jump::new(ops.s_minus, gamma), Jump::new(ops.s_plus, gamma)])
}

/// `L₁ = S₋` only.
pub fn two_qubit_single_decay(gamma: f64) -> Result<LindbladModel> {
    check_rate("γ", gamma)?;
    LindbladModel::dissipative(4, vec![Jump::new(two_qubit_ops().s_minus, gamma)])
}

/// `H = Ω S_x` with `S_x = (σ_x¹ + σ_x²)/2`, `L₁ = S₋`.
pub fn two_qubit_driven(omega: f64, gamma: f64) -> Result<LindbladModel> {
    check_rate("γ", gamma)?;
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidModel(format!("drive Ω must be positive, got {omega}")));
    }
    let ops = two_qubit_ops();
    LindbladModel::new(ops.s_x.scale_real(omega), vec![Jump::new(ops.s_minus, gamma)])
}

/// Named two-qubit basis states.
pub mod two_qubit {
    use super::*;

    fn pure(v: [C64; 4]) -> DensityMatrix {
        DensityMatrix::from_pure(&v).expect("normalized")
    }

    /// `|11⟩`, both excited.
    pub fn up_up() -> DensityMatrix {
        pure([ONE, ZERO, ZERO, ZERO])
    }

    /// `|00⟩`, both in the ground state.
    pub fn down_down() -> DensityMatrix {
        pure([ZERO, ZERO, ZERO, ONE])
    }

    pub fn phi_plus_vector() -> [C64; 4] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [ZERO, s, s, ZERO]
    }

    pub fn phi_minus_vector() -> [C64; 4] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [ZERO, s, -s, ZERO]
    }

    /// `(|10⟩ + |01⟩)/√2`
    pub fn phi_plus() -> DensityMatrix {
        pure(phi_plus_vector())
    }

    /// Singlet `(|10⟩ − |01⟩)/√2`.
    pub fn phi_minus() -> DensityMatrix {
        pure(phi_minus_vector())
    }
}

/// Two ensembles described on the coupled basis of their big spins, where
/// collective operators are block diagonal in `S`.
#[derive(Clone, Debug)]
pub struct TwoEnsemble {
    space: CoupledSpinSpace,
    s_minus: ComplexMatrix,
    s_z: ComplexMatrix,
    generator: ComplexMatrix,
}

impl TwoEnsemble {
    pub fn new(pair: SpinEnsemblePair) -> Self {
        let space = CoupledSpinSpace::new(pair);
        let dim = space.dim();
        let mut s_minus = ComplexMatrix::zeros(dim, dim);
        let mut s_z = ComplexMatrix::zeros(dim, dim);
        for (k, &(s, m)) in space.labels().iter().enumerate() {
            s_z[(k, k)] = C64::new(m.value(), 0.0);
            if m.twice() > -s.twice() {
                let lower = space.index_of(s, HalfInt::from_twice(m.twice() - 2)).expect("M − 1 in sector");
                let (sv, mv) = (s.value(), m.value());
                s_minus[(lower, k)] = C64::new((sv * (sv + 1.0) - mv * (mv - 1.0)).sqrt(), 0.0);
            }
        }
        let generator = crate::spins::dicke_generator_matrix(&space);
        Self { space, s_minus, s_z, generator }
    }

    /// Balanced sizes `N_A = N_B = N/2`.
    pub fn balanced(n: usize) -> Result<Self> {
        Ok(Self::new(SpinEnsemblePair::balanced(n)?))
    }

    pub fn with_imbalance(n: usize, eta: usize) -> Result<Self> {
        Ok(Self::new(SpinEnsemblePair::with_imbalance(n, eta)?))
    }

    pub fn space(&self) -> &CoupledSpinSpace {
        &self.space
    }

    pub fn pair(&self) -> &SpinEnsemblePair {
        self.space.pair()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn s_minus(&self) -> &ComplexMatrix {
        &self.s_minus
    }

    pub fn s_plus(&self) -> ComplexMatrix {
        self.s_minus.adjoint()
    }

    pub fn s_z(&self) -> &ComplexMatrix {
        &self.s_z
    }

    /// `S_z^A − S_z^B` in the coupled basis.
    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    /// `L₁ = S₋`
    pub fn decay_model(&self, gamma: f64) -> Result<LindbladModel> {
        check_rate("γ", gamma)?;
        LindbladModel::dissipative(self.dim(), vec![Jump::new(self.s_minus.clone(), gamma)])
    }

    /// `L₁ = S₋`, `L₂ = S₊` with equal rates.
    pub fn balanced_model(&self, gamma: f64) -> Result<LindbladModel> {
        check_rate("γ", gamma)?;
        LindbladModel::dissipative(
            self.dim(),
            vec![Jump::new(self.s_minus.clone(), gamma), Jump::new(self.s_plus(), gamma)],
        )
    }

    fn basis_state(&self, s: HalfInt, m: HalfInt) -> Result<Vec<C64>> {
        let k = self
            .space
            .index_of(s, m)
            .ok_or_else(|| Error::QuantumNumbers(format!("|S={s}, M={m}⟩ is not in this space")))?;
        let mut v = vec![ZERO; self.dim()];
        v[k] = ONE;
        Ok(v)
    }

    pub fn dicke_vector(&self, s: HalfInt, m: HalfInt) -> Result<Vec<C64>> {
        self.basis_state(s, m)
    }

    /// `|S, M⟩⟨S, M|`
    pub fn dicke_state(&self, s: HalfInt, m: HalfInt) -> Result<DensityMatrix> {
        DensityMatrix::from_pure(&self.basis_state(s, m)?)
    }

    /// `|ψ_dif⟩` (A up, B down) or, flipped, A down and B up.
    pub fn psi_dif_vector(&self, flipped: bool) -> Vec<C64> {
        self.space.vector_to_coupled(&crate::spins::psi_dif_vector(self.pair(), flipped))
    }

    pub fn psi_dif(&self, flipped: bool) -> DensityMatrix {
        DensityMatrix::symmetrized(&ComplexMatrix::outer(&self.psi_dif_vector(flipped), &self.psi_dif_vector(flipped)))
            .expect("unit vector")
    }

    /// Projector onto the spin-`S` sector.
    pub fn sector_projector(&self, s: HalfInt) -> ComplexMatrix {
        let d: Vec<C64> = self.space.labels().iter().map(|&(ls, _)| if ls == s { ONE } else { ZERO }).collect();
        ComplexMatrix::diagonal(&d)
    }

    /// `ρ_B,S`: equal mixture over `M` in the spin-`S` sector.
    pub fn balanced_mixture(&self, s: HalfInt) -> Result<DensityMatrix> {
        if !self.space.sectors().contains(&s) {
            return Err(Error::QuantumNumbers(format!("sector S = {s} not present")));
        }
        DensityMatrix::new(self.sector_projector(s).scale_real(1.0 / (s.twice() + 1) as f64))
    }

    /// `Σ_S p(S) |S, −S⟩⟨S, −S|` for the sectors reached from `|ψ_dif⟩`.
    pub fn decay_steady_state(&self) -> Result<DensityMatrix> {
        let mut d = vec![ZERO; self.dim()];
        for (s, p) in p_of_s(self.pair()) {
            let k = self.space.index_of(s, HalfInt::from_twice(-s.twice())).expect("sector present");
            d[k] = C64::new(p, 0.0);
        }
        DensityMatrix::new(ComplexMatrix::diagonal(&d))
    }

    /// Population of each sector.
    pub fn sector_populations(&self, rho: &DensityMatrix) -> Vec<(HalfInt, f64)> {
        self.space
            .sectors()
            .iter()
            .map(|&s| (s, rho.expectation(&self.sector_projector(s)).re))
            .collect()
    }
}
