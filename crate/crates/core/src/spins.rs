//! Collective spins of two qubit ensembles, the coupled `|S, M⟩` basis and
//! Clebsch–Gordan coefficients.
//!
//! Each ensemble of `N_X` qubits is represented by its permutation-symmetric
//! big spin `S_X = N_X/2`. The product basis `|S_A, M_A⟩ ⊗ |S_B, M_B⟩` lists
//! `M` in descending order within each factor, so index 0 of a single qubit
//! is the excited state and `σ₋ = [[0, 0], [1, 0]]`. The coupled basis lists
//! sectors by ascending `S` and, inside a sector, `M` ascending.

use std::fmt;
use std::sync::RwLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::algebra::{kron, ComplexMatrix, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::state::DensityMatrix;

/// Half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i64);

impl HalfInt {
    pub const fn from_twice(twice: i64) -> Self {
        Self(twice)
    }

    pub const fn integer(n: i64) -> Self {
        Self(2 * n)
    }

    pub const fn twice(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Ladder and `S_z` matrices of a spin `j = twice_j/2`, `M` descending.
pub struct SpinMatrices {
    pub plus: ComplexMatrix,
    pub minus: ComplexMatrix,
    pub z: ComplexMatrix,
}

pub fn spin_matrices(twice_j: usize) -> SpinMatrices {
    let n = twice_j + 1;
    let j = twice_j as f64 / 2.0;
    let m_of = |k: usize| j - k as f64;
    let mut plus = ComplexMatrix::zeros(n, n);
    for k in 1..n {
        let m = m_of(k);
        plus[(k - 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let z = ComplexMatrix::diagonal(&(0..n).map(|k| C64::new(m_of(k), 0.0)).collect::<Vec<_>>());
    SpinMatrices { minus: plus.adjoint(), plus, z }
}

/// Two qubit ensembles with `N_A ≥ N_B` and an even size difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinEnsemblePair {
    n_a: usize,
    n_b: usize,
}

impl SpinEnsemblePair {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a < n_b {
            return Err(Error::Config(format!("ensemble A ({n_a}) must not be smaller than B ({n_b})")));
        }
        if (n_a - n_b) % 2 != 0 {
            return Err(Error::Config(format!("N_A − N_B = {} must be even", n_a - n_b)));
        }
        Ok(Self { n_a, n_b })
    }

    pub fn balanced(n: usize) -> Result<Self> {
        Self::with_imbalance(n, 0)
    }

    /// `N_A = N/2 + η`, `N_B = N/2 − η`.
    pub fn with_imbalance(n: usize, eta: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Config(format!("total qubit number {n} must be even")));
        }
        if eta > n / 2 {
            return Err(Error::Config(format!("imbalance {eta} exceeds N/2 = {}", n / 2)));
        }
        Self::new(n / 2 + eta, n / 2 - eta)
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn total(&self) -> usize {
        self.n_a + self.n_b
    }

    pub fn spin_a(&self) -> HalfInt {
        HalfInt::from_twice(self.n_a as i64)
    }

    pub fn spin_b(&self) -> HalfInt {
        HalfInt::from_twice(self.n_b as i64)
    }

    /// `η = (N_A − N_B)/2`
    pub fn imbalance(&self) -> usize {
        (self.n_a - self.n_b) / 2
    }

    pub fn is_balanced(&self) -> bool {
        self.n_a == self.n_b
    }

    pub fn product_dim(&self) -> usize {
        (self.n_a + 1) * (self.n_b + 1)
    }

    /// Product-basis index of `|S_A, M_A⟩ ⊗ |S_B, M_B⟩`.
    pub fn product_index(&self, m_a: HalfInt, m_b: HalfInt) -> Option<usize> {
        let ia = (self.n_a as i64 - m_a.twice()) / 2;
        let ib = (self.n_b as i64 - m_b.twice()) / 2;
        let valid = (self.n_a as i64 - m_a.twice()) % 2 == 0
            && (self.n_b as i64 - m_b.twice()) % 2 == 0
            && (0..=self.n_a as i64).contains(&ia)
            && (0..=self.n_b as i64).contains(&ib);
        valid.then(|| ia as usize * (self.n_b + 1) + ib as usize)
    }
}

/// Collective operators `S_α = S_α^A + S_α^B` on a product space.
#[derive(Clone, Debug)]
pub struct CollectiveOps {
    pub s_minus: ComplexMatrix,
    pub s_plus: ComplexMatrix,
    pub s_z: ComplexMatrix,
    pub s_x: ComplexMatrix,
    pub s_z_a: ComplexMatrix,
    pub s_z_b: ComplexMatrix,
    pub s_squared: ComplexMatrix,
}

impl CollectiveOps {
    /// Differential generator `S_z^A − S_z^B`.
    pub fn differential_generator(&self) -> ComplexMatrix {
        &self.s_z_a - &self.s_z_b
    }

    fn assemble(
        plus_a: ComplexMatrix,
        plus_b: ComplexMatrix,
        z_a: ComplexMatrix,
        z_b: ComplexMatrix,
    ) -> Self {
        let s_plus = &plus_a + &plus_b;
        let s_minus = s_plus.adjoint();
        let s_z = &z_a + &z_b;
        let s_x = (&s_plus + &s_minus).scale_real(0.5);
        // S² = S₊S₋ + S_z² − S_z
        let s_squared = &(&(&s_plus * &s_minus) + &(&s_z * &s_z)) - &s_z;
        Self { s_minus, s_plus, s_z, s_x, s_z_a: z_a, s_z_b: z_b, s_squared }
    }
}

/// Collective operators on the two-big-spin product space.
pub fn collective_ops(pair: &SpinEnsemblePair) -> CollectiveOps {
    let a = spin_matrices(pair.n_a);
    let b = spin_matrices(pair.n_b);
    let ia = ComplexMatrix::identity(pair.n_a + 1);
    let ib = ComplexMatrix::identity(pair.n_b + 1);
    CollectiveOps::assemble(kron(&a.plus, &ib), kron(&ia, &b.plus), kron(&a.z, &ib), kron(&ia, &b.z))
}

/// Collective operators on the full `2^N` register (qubits `0..N_A` form
/// ensemble A). Only intended as a cross-check for small `N`.
pub fn qubit_register_ops(n_a: usize, n_b: usize) -> Result<CollectiveOps> {
    let n = n_a + n_b;
    if n == 0 || n > 10 {
        return Err(Error::Config(format!("full register construction limited to 1..=10 qubits, got {n}")));
    }
    let q = spin_matrices(1);
    let id2 = ComplexMatrix::identity(2);
    let embed = |op: &ComplexMatrix, site: usize| {
        (0..n).fold(ComplexMatrix::identity(1), |acc, k| kron(&acc, if k == site { op } else { &id2 }))
    };
    let dim = 1usize << n;
    let sum = |op: &ComplexMatrix, sites: std::ops::Range<usize>| {
        sites.fold(ComplexMatrix::zeros(dim, dim), |acc, k| &acc + &embed(op, k))
    };
    Ok(CollectiveOps::assemble(
        sum(&q.plus, 0..n_a),
        sum(&q.plus, n_a..n),
        sum(&q.z, 0..n_a),
        sum(&q.z, n_a..n),
    ))
}

/// A Clebsch–Gordan coefficient `⟨j1 m1; j2 m2 | j m⟩` (Condon–Shortley).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClebschGordan {
    pub j1: HalfInt,
    pub j2: HalfInt,
    pub j: HalfInt,
    pub m1: HalfInt,
    pub m2: HalfInt,
    pub m: HalfInt,
    pub value: f64,
    /// False when the quantum numbers violate a selection rule; `value` is 0.
    pub allowed: bool,
}

static FACTORIALS: RwLock<Vec<BigInt>> = RwLock::new(Vec::new());

fn factorial(n: i64) -> BigInt {
    let n = usize::try_from(n).expect("factorial of a negative number");
    if let Some(f) = FACTORIALS.read().expect("factorial cache poisoned").get(n) {
        return f.clone();
    }
    let mut cache = FACTORIALS.write().expect("factorial cache poisoned");
    if cache.is_empty() {
        cache.push(BigInt::one());
    }
    while cache.len() <= n {
        let k = cache.len();
        let next = &cache[k - 1] * BigInt::from(k);
        cache.push(next);
    }
    cache[n].clone()
}

fn selection_allowed(j1: i64, j2: i64, j: i64, m1: i64, m2: i64, m: i64) -> bool {
    j1 >= 0
        && j2 >= 0
        && j >= 0
        && m1.abs() <= j1
        && m2.abs() <= j2
        && m.abs() <= j
        && (j1 - m1) % 2 == 0
        && (j2 - m2) % 2 == 0
        && (j - m) % 2 == 0
        && m1 + m2 == m
        && (j1 - j2).abs() <= j
        && j <= j1 + j2
        && (j1 + j2 + j) % 2 == 0
}

/// `⟨j1 m1; j2 m2 | j m⟩` from the Racah sum, evaluated in exact rational
/// arithmetic and rounded to `f64` once at the end.
pub fn clebsch_gordan(j1: HalfInt, j2: HalfInt, j: HalfInt, m1: HalfInt, m2: HalfInt, m: HalfInt) -> ClebschGordan {
    let (tj1, tj2, tj, tm1, tm2, tm) = (j1.twice(), j2.twice(), j.twice(), m1.twice(), m2.twice(), m.twice());
    let mut out = ClebschGordan { j1, j2, j, m1, m2, m, value: 0.0, allowed: false };
    if !selection_allowed(tj1, tj2, tj, tm1, tm2, tm) {
        return out;
    }
    out.allowed = true;
    // all of these are integers once the selection rules hold
    let h = |twice: i64| twice / 2;
    let a = h(tj1 + tj2 - tj);
    let b = h(tj1 - tj2 + tj);
    let c = h(-tj1 + tj2 + tj);
    let d = h(tj1 + tj2 + tj) + 1;
    let (jpm, jmm) = (h(tj + tm), h(tj - tm));
    let (j1mm1, j1pm1) = (h(tj1 - tm1), h(tj1 + tm1));
    let (j2mm2, j2pm2) = (h(tj2 - tm2), h(tj2 + tm2));
    let e = h(tj - tj2 + tm1);
    let f = h(tj - tj1 - tm2);

    let k_min = 0.max(-e).max(-f);
    let k_max = a.min(j1mm1).min(j2pm2);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let denom = factorial(k)
            * factorial(a - k)
            * factorial(j1mm1 - k)
            * factorial(j2pm2 - k)
            * factorial(e + k)
            * factorial(f + k);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return out;
    }
    let prefactor = BigRational::new(
        BigInt::from(tj + 1)
            * factorial(a)
            * factorial(b)
            * factorial(c)
            * factorial(jpm)
            * factorial(jmm)
            * factorial(j1mm1)
            * factorial(j1pm1)
            * factorial(j2mm2)
            * factorial(j2pm2),
        factorial(d),
    );
    let squared = prefactor * &sum * &sum;
    let magnitude = squared.to_f64().unwrap_or(f64::NAN).sqrt();
    out.value = if sum.is_negative() { -magnitude } else { magnitude };
    out
}

/// `C_S = ⟨S, 0 | N/4, +N/4; N/4, −N/4⟩` from its closed form
/// `√(2S+1) √((N/2)!² / ((N/2 − S)! (N/2 + 1 + S)!))`.
pub fn cg_balanced_closed_form(n: usize, s: usize) -> Result<f64> {
    if n % 2 != 0 || s > n / 2 {
        return Err(Error::QuantumNumbers(format!("need even N and S ≤ N/2 (N = {n}, S = {s})")));
    }
    let half = (n / 2) as i64;
    let s = s as i64;
    let ratio = BigRational::new(
        BigInt::from(2 * s + 1) * factorial(half) * factorial(half),
        factorial(half - s) * factorial(half + 1 + s),
    );
    Ok(ratio.to_f64().unwrap_or(f64::NAN).sqrt())
}

/// Coupled basis of a [`SpinEnsemblePair`] and the map to it.
#[derive(Clone, Debug)]
pub struct CoupledSpinSpace {
    pair: SpinEnsemblePair,
    /// Total spins, ascending.
    sectors: Vec<HalfInt>,
    /// `(S, M)` for each coupled index.
    labels: Vec<(HalfInt, HalfInt)>,
    /// Columns are the coupled states `|S, M⟩` written in the product basis,
    /// so `cg_map† · O · cg_map` is `O` in the coupled basis.
    cg_map: ComplexMatrix,
}

impl CoupledSpinSpace {
    pub fn new(pair: SpinEnsemblePair) -> Self {
        let (ta, tb) = (pair.n_a as i64, pair.n_b as i64);
        let sectors: Vec<HalfInt> =
            ((ta - tb).abs()..=ta + tb).step_by(2).map(HalfInt::from_twice).collect();
        let mut labels = Vec::with_capacity(pair.product_dim());
        for &s in &sectors {
            for tm in (-s.twice()..=s.twice()).step_by(2) {
                labels.push((s, HalfInt::from_twice(tm)));
            }
        }
        let dim = pair.product_dim();
        let mut cg_map = ComplexMatrix::zeros(dim, dim);
        for (col, &(s, m)) in labels.iter().enumerate() {
            for tma in (-ta..=ta).step_by(2) {
                let tmb = m.twice() - tma;
                if tmb.abs() > tb {
                    continue;
                }
                let (ma, mb) = (HalfInt::from_twice(tma), HalfInt::from_twice(tmb));
                let c = clebsch_gordan(pair.spin_a(), pair.spin_b(), s, ma, mb, m).value;
                if c != 0.0 {
                    let row = pair.product_index(ma, mb).expect("valid projections");
                    cg_map[(row, col)] = C64::new(c, 0.0);
                }
            }
        }
        Self { pair, sectors, labels, cg_map }
    }

    pub fn pair(&self) -> &SpinEnsemblePair {
        &self.pair
    }

    pub fn sectors(&self) -> &[HalfInt] {
        &self.sectors
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[(HalfInt, HalfInt)] {
        &self.labels
    }

    pub fn cg_map(&self) -> &ComplexMatrix {
        &self.cg_map
    }

    pub fn index_of(&self, s: HalfInt, m: HalfInt) -> Option<usize> {
        self.labels.iter().position(|&l| l == (s, m))
    }

    /// Operator in the coupled basis.
    pub fn to_coupled(&self, op: &ComplexMatrix) -> ComplexMatrix {
        &(&self.cg_map.adjoint() * op) * &self.cg_map
    }

    /// Operator from the coupled basis back to the product basis.
    pub fn to_product(&self, op: &ComplexMatrix) -> ComplexMatrix {
        &(&self.cg_map * op) * &self.cg_map.adjoint()
    }

    pub fn vector_to_coupled(&self, v: &[C64]) -> Vec<C64> {
        self.cg_map.adjoint().mul_vec(v)
    }

    pub fn state_to_coupled(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::symmetrized(&self.to_coupled(rho.matrix())).expect("unitary map preserves the trace")
    }

    pub fn state_to_product(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::symmetrized(&self.to_product(rho.matrix())).expect("unitary map preserves the trace")
    }

    /// Dicke state `|S, M⟩` as a product-basis vector.
    pub fn dicke_vector(&self, s: HalfInt, m: HalfInt) -> Result<Vec<C64>> {
        let idx = self
            .index_of(s, m)
            .ok_or_else(|| Error::QuantumNumbers(format!("|S={s}, M={m}⟩ is not in this space")))?;
        Ok(self.cg_map.column(idx).to_vec())
    }

    /// `|S, M⟩⟨S, M|` in the product basis.
    pub fn dicke_state(&self, s: HalfInt, m: HalfInt) -> Result<DensityMatrix> {
        DensityMatrix::from_pure(&self.dicke_vector(s, m)?)
    }

    /// Projector onto the spin-`S` sector, product basis.
    pub fn sector_projector(&self, s: HalfInt) -> ComplexMatrix {
        let dim = self.dim();
        let mut p = ComplexMatrix::zeros(dim, dim);
        for (k, &(ls, _)) in self.labels.iter().enumerate() {
            if ls == s {
                p = &p + &ComplexMatrix::outer(self.cg_map.column(k), self.cg_map.column(k));
            }
        }
        p
    }

    /// `ρ_B,S = (2S+1)⁻¹ Σ_M |S, M⟩⟨S, M|`, product basis.
    pub fn balanced_mixture(&self, s: HalfInt) -> Result<DensityMatrix> {
        if !self.sectors.contains(&s) {
            return Err(Error::QuantumNumbers(format!("sector S = {s} not present")));
        }
        let p = self.sector_projector(s);
        DensityMatrix::new(p.scale_real(1.0 / (s.twice() + 1) as f64))
    }

    /// Population of each sector in `rho` (product basis).
    pub fn sector_populations(&self, rho: &DensityMatrix) -> Vec<(HalfInt, f64)> {
        let coupled = self.to_coupled(rho.matrix());
        self.sectors
            .iter()
            .map(|&s| {
                let pop = self
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.0 == s)
                    .map(|(k, _)| coupled[(k, k)].re)
                    .sum();
                (s, pop)
            })
            .collect()
    }
}

/// `|ψ_dif⟩ = |S_A, +S_A⟩ ⊗ |S_B, −S_B⟩` (ensemble A up, B down); the
/// flipped variant has A down and B up.
pub fn psi_dif_vector(pair: &SpinEnsemblePair, flipped: bool) -> Vec<C64> {
    let (sa, sb) = (pair.spin_a().twice(), pair.spin_b().twice());
    let (ma, mb) = if flipped { (-sa, sb) } else { (sa, -sb) };
    let idx = pair
        .product_index(HalfInt::from_twice(ma), HalfInt::from_twice(mb))
        .expect("extremal projections exist");
    let mut v = vec![ZERO; pair.product_dim()];
    v[idx] = ONE;
    v
}

pub fn psi_dif(pair: &SpinEnsemblePair, flipped: bool) -> DensityMatrix {
    DensityMatrix::from_pure(&psi_dif_vector(pair, flipped)).expect("basis vector is normalized")
}

/// `p(S) = |⟨S, η | S_A, +S_A; S_B, −S_B⟩|²` for `S = η … N/2`.
pub fn p_of_s(pair: &SpinEnsemblePair) -> Vec<(HalfInt, f64)> {
    let (sa, sb) = (pair.spin_a(), pair.spin_b());
    let m = HalfInt::from_twice(sa.twice() - sb.twice());
    let neg_sb = HalfInt::from_twice(-sb.twice());
    ((sa.twice() - sb.twice())..=(sa.twice() + sb.twice()))
        .step_by(2)
        .map(|ts| {
            let s = HalfInt::from_twice(ts);
            let c = clebsch_gordan(sa, sb, s, sa, neg_sb, m).value;
            (s, c * c)
        })
        .collect()
}

/// Differential generator `G = S_z^A − S_z^B` in the coupled basis. Balanced
/// pairs use the closed-form tridiagonal matrix elements; otherwise the
/// product-basis operator is transformed with the Clebsch–Gordan map.
pub fn dicke_generator_matrix(space: &CoupledSpinSpace) -> ComplexMatrix {
    if space.pair.is_balanced() {
        generator_closed_form(space)
    } else {
        generator_via_cg(space)
    }
}

/// `G` from the product basis, transformed to the coupled basis.
pub fn generator_via_cg(space: &CoupledSpinSpace) -> ComplexMatrix {
    space.to_coupled(&collective_ops(&space.pair).differential_generator())
}

/// `⟨S−1, M|G|S, M⟩ = √((S² − M²)((N/2 + 1)² − S²) / (4S² − 1))` for balanced
/// ensembles.
pub fn generator_closed_form(space: &CoupledSpinSpace) -> ComplexMatrix {
    let n = space.pair.total() as f64;
    let dim = space.dim();
    let mut g = ComplexMatrix::zeros(dim, dim);
    for (col, &(s, m)) in space.labels.iter().enumerate() {
        if s.twice() < 2 {
            continue;
        }
        let lower = HalfInt::from_twice(s.twice() - 2);
        let Some(row) = space.index_of(lower, m) else {
            continue;
        };
        let (sv, mv) = (s.value(), m.value());
        let elem = ((sv * sv - mv * mv) * ((n / 2.0 + 1.0).powi(2) - sv * sv) / (4.0 * sv * sv - 1.0)).sqrt();
        g[(row, col)] = C64::new(elem, 0.0);
        g[(col, row)] = C64::new(elem, 0.0);
    }
    g
}
