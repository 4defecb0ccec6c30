//! Steady states reached from a given initial state.
//!
//! Four routes are provided: spectral decomposition with the metric
//! `(T⁻¹)†T⁻¹`, biorthogonal kernel projection, orthogonal projection for
//! Hermitian Liouvillians, and a single shifted linear solve.

use crate::algebra::{
    devectorize, dot, eig, norm, solve_linear, svd, ComplexMatrix, Operator, SolveMethod, SolveOptions,
    VectorizedState, C64, ZERO,
};
use crate::error::{Error, Result};
use crate::lindblad::Superoperator;
use crate::state::DensityMatrix;

/// Relative singular-value cutoff defining the kernel.
pub const TOL_NULL: f64 = 1e-10;
/// `T` with a larger condition number is refused by [`steady_spectral`].
pub const SPECTRAL_CONDITION_LIMIT: f64 = 1e10;
/// `M_O` with a larger condition number signals misaligned kernels.
pub const OVERLAP_CONDITION_LIMIT: f64 = 1e8;
/// Largest superoperator dimension handled by dense decompositions.
pub const DENSE_LIMIT: usize = 8192;

/// Biorthogonal bases of `ker 𝓛` (right, orthonormal) and `ker 𝓛†` (left).
#[derive(Clone, Debug)]
pub struct SteadyStateBasis {
    hilbert_dim: usize,
    right: Vec<VectorizedState>,
    left: Vec<VectorizedState>,
}

/// Residuals of the [`SteadyStateBasis`] invariants.
#[derive(Clone, Copy, Debug)]
pub struct BasisResiduals {
    /// `max_j ‖𝓛 𝓥_j‖`
    pub right_kernel: f64,
    /// `max_j ‖𝓛† 𝓤_j‖`
    pub left_kernel: f64,
    /// `max_jk |𝓤_j†𝓥_k − δ_jk|`
    pub biorthogonality: f64,
    /// `max_jk |𝓥_j†𝓥_k − δ_jk|`
    pub orthonormality: f64,
}

impl SteadyStateBasis {
    pub fn n(&self) -> usize {
        self.right.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    pub fn right_vectors(&self) -> &[VectorizedState] {
        &self.right
    }

    pub fn left_vectors(&self) -> &[VectorizedState] {
        &self.left
    }

    /// Right kernel vectors as matrices.
    pub fn right_matrices(&self) -> Vec<ComplexMatrix> {
        self.right.iter().map(|v| devectorize(v).expect("square by construction")).collect()
    }

    /// `c̃_j = 𝓤_j† vec(ρ₀)`
    pub fn overlaps(&self, rho0: &DensityMatrix) -> Result<Vec<C64>> {
        let v = self.check_state(rho0)?;
        Ok(self.left.iter().map(|u| dot(u.as_slice(), v.as_slice())).collect())
    }

    pub fn residuals(&self, sop: &Superoperator) -> BasisResiduals {
        let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
        let right_kernel = max(&mut self.right.iter().map(|v| norm(&sop.mul_vec(v.as_slice()))));
        let left_kernel = max(&mut self.left.iter().map(|u| norm(&sop.adjoint().mul_vec(u.as_slice()))));
        let gram_err = |a: &[VectorizedState], b: &[VectorizedState]| {
            let mut worst: f64 = 0.0;
            for (j, x) in a.iter().enumerate() {
                for (k, y) in b.iter().enumerate() {
                    let target = if j == k { 1.0 } else { 0.0 };
                    worst = worst.max((dot(x.as_slice(), y.as_slice()) - target).norm());
                }
            }
            worst
        };
        BasisResiduals {
            right_kernel,
            left_kernel,
            biorthogonality: gram_err(&self.left, &self.right),
            orthonormality: gram_err(&self.right, &self.right),
        }
    }

    fn check_state(&self, rho0: &DensityMatrix) -> Result<VectorizedState> {
        if rho0.dim() != self.hilbert_dim {
            return Err(Error::Dimension(format!(
                "initial state has dimension {}, basis expects {}",
                rho0.dim(),
                self.hilbert_dim
            )));
        }
        Ok(rho0.vectorized())
    }
}

/// Index sets closed under `𝓛` and `𝓛†`, from the sparsity pattern.
/// Sorted by smallest member.
fn invariant_blocks(op: &Operator) -> Vec<Vec<usize>> {
    let n = op.rows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    match op {
        Operator::Dense(m) => {
            for j in 0..n {
                for (i, z) in m.column(j).iter().enumerate() {
                    if *z != ZERO {
                        union(i, j);
                    }
                }
            }
        }
        Operator::Sparse(s) => {
            for (i, j, _) in s.triplets() {
                union(i, j);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// Dense copies of the diagonal blocks of `op` on each index set.
fn block_matrices(op: &Operator, blocks: &[Vec<usize>]) -> Vec<ComplexMatrix> {
    match op {
        Operator::Dense(m) => blocks
            .iter()
            .map(|idx| ComplexMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])]))
            .collect(),
        Operator::Sparse(s) => {
            let mut owner = vec![(0usize, 0usize); s.rows()];
            for (b, idx) in blocks.iter().enumerate() {
                for (a, &i) in idx.iter().enumerate() {
                    owner[i] = (b, a);
                }
            }
            let mut out: Vec<ComplexMatrix> = blocks.iter().map(|idx| ComplexMatrix::zeros(idx.len(), idx.len())).collect();
            for (i, j, v) in s.triplets() {
                let ((bi, a), (bj, c)) = (owner[i], owner[j]);
                debug_assert_eq!(bi, bj);
                out[bi][(a, c)] += v;
            }
            out
        }
    }
}

/// Orthonormalizes the columns of `v` (already orthonormal, spanning some
/// subspace) into a basis fixed by the subspace alone: rows are chosen by
/// greedy pivoting on residual norm, the columns are made to vanish on the
/// other pivot rows, Gram–Schmidt runs in pivot order and each vector's pivot
/// entry is made real positive. Returns the unitary `R` with `v_new = v R`.
fn canonical_rotation(v: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (rows, n) = (v.rows(), v.cols());
    // residual rows of V after projecting out chosen rows
    let mut work = v.clone();
    let mut pivots = Vec::with_capacity(n);
    for _ in 0..n {
        let norms: Vec<f64> = (0..rows)
            .map(|i| (0..n).map(|j| work[(i, j)].norm_sqr()).sum::<f64>())
            .collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        let p = norms
            .iter()
            .position(|&x| x >= max * (1.0 - 1e-8))
            .ok_or_else(|| Error::Numerical("pivot search failed".into()))?;
        if max <= 0.0 {
            return Err(Error::Numerical("kernel vectors are linearly dependent".into()));
        }
        pivots.push(p);
        let row: Vec<C64> = (0..n).map(|j| work[(p, j)]).collect();
        let rn = norm(&row);
        let unit: Vec<C64> = row.iter().map(|z| z / rn).collect();
        for i in 0..rows {
            let proj: C64 = (0..n).map(|j| work[(i, j)] * unit[j].conj()).sum();
            for j in 0..n {
                work[(i, j)] -= proj * unit[j];
            }
        }
    }
    // W = (V[pivots, :])⁻¹, so V W is the identity on the pivot rows
    let vp = ComplexMatrix::from_fn(n, n, |a, j| v[(pivots[a], j)]);
    let w = solve_dense(&vp, &ComplexMatrix::identity(n))?;
    let mut basis = v * &w;
    for k in 0..n {
        for prev in 0..k {
            let q = basis.column(prev).to_vec();
            let c = dot(&q, basis.column(k));
            for i in 0..rows {
                basis[(i, k)] -= c * q[i];
            }
        }
        let nk = norm(basis.column(k));
        let pivot = basis[(pivots[k], k)];
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..rows {
            basis[(i, k)] = basis[(i, k)] * phase / nk;
        }
    }
    Ok(&v.adjoint() * &basis)
}

fn solve_dense(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    use faer::linalg::solvers::Solve;
    let x = a.as_faer().partial_piv_lu().solve(b.as_faer());
    let x = ComplexMatrix::from_faer(x.as_ref());
    if x.as_slice().iter().any(|z| !z.is_finite()) {
        return Err(Error::Numerical("singular matrix in dense solve".into()));
    }
    Ok(x)
}

/// Kernel bases of `𝓛` and `𝓛†` from the SVD `𝓛 = U′ΣV†`.
///
/// The superoperator is first split into blocks that it leaves invariant
/// (connected components of its sparsity pattern); each block is decomposed
/// densely. Zero singular values are those `≤ TOL_NULL · σ_max` with the global
/// `σ_max`. With `M_O = V_null† U′_null`, the left set is `U′_null M_O⁻¹`.
pub fn kernel_basis(sop: &Superoperator) -> Result<SteadyStateBasis> {
    let op = sop.matrix();
    let n = op.rows();
    let blocks = invariant_blocks(op);
    let largest = blocks.iter().map(Vec::len).max().unwrap_or(0);
    if largest > DENSE_LIMIT {
        return Err(Error::Contract(format!(
            "kernel extraction needs a dense SVD of a {largest}x{largest} block; use the resolvent method"
        )));
    }
    let decomps = block_matrices(op, &blocks).iter().map(svd).collect::<Result<Vec<_>>>()?;
    let sigma_max = decomps.iter().map(|d| d.max_singular_value()).fold(0.0, f64::max);
    let cutoff = TOL_NULL * sigma_max;

    let mut right = Vec::new();
    let mut left = Vec::new();
    for (idx, d) in blocks.iter().zip(&decomps) {
        let null: Vec<usize> = (0..idx.len()).filter(|&k| d.singular_values[k] <= cutoff).collect();
        if null.is_empty() {
            continue;
        }
        let k = idx.len();
        let v_null = ComplexMatrix::from_fn(k, null.len(), |i, j| d.v[(i, null[j])]);
        let u_null = ComplexMatrix::from_fn(k, null.len(), |i, j| d.u[(i, null[j])]);
        let overlap = &v_null.adjoint() * &u_null;
        let cond = crate::algebra::condition_number(&overlap)?;
        if !(cond <= OVERLAP_CONDITION_LIMIT) {
            return Err(Error::KernelMisaligned { condition: cond });
        }
        let u_bi = &u_null * &solve_dense(&overlap, &ComplexMatrix::identity(null.len()))?;
        // rotate the right set to a canonical orthonormal basis, left set alike
        let r = canonical_rotation(&v_null)?;
        let v_can = &v_null * &r;
        let u_can = &u_bi * &r;
        for j in 0..null.len() {
            let mut rv = vec![ZERO; n];
            let mut lv = vec![ZERO; n];
            for (a, &i) in idx.iter().enumerate() {
                rv[i] = v_can[(a, j)];
                lv[i] = u_can[(a, j)];
            }
            right.push(VectorizedState::new(rv));
            left.push(VectorizedState::new(lv));
        }
    }
    Ok(SteadyStateBasis { hilbert_dim: sop.hilbert_dim(), right, left })
}

/// `ρ_SS = Σ_j (𝓤_j† vec ρ₀) 𝓥_j`
pub fn steady_kernel(basis: &SteadyStateBasis, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    let c = basis.overlaps(rho0)?;
    combine(basis.hilbert_dim, &basis.right, &c)
}

/// `ρ_SS = Σ_j (𝓥_j† vec ρ₀) 𝓥_j`, valid only when `𝓛` is Hermitian.
pub fn steady_hermitian(sop: &Superoperator, basis: &SteadyStateBasis, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if !sop.is_hermitian() {
        return Err(Error::Contract(format!(
            "orthogonal projection needs a Hermitian Liouvillian (‖𝓛 − 𝓛†‖_F = {:.3e}); use the kernel method",
            sop.hermitian_asymmetry()
        )));
    }
    let v = basis.check_state(rho0)?;
    let c: Vec<C64> = basis.right.iter().map(|r| dot(r.as_slice(), v.as_slice())).collect();
    combine(basis.hilbert_dim, &basis.right, &c)
}

fn combine(dim: usize, vectors: &[VectorizedState], coeffs: &[C64]) -> Result<DensityMatrix> {
    let mut acc = vec![ZERO; dim * dim];
    for (v, &c) in vectors.iter().zip(coeffs) {
        for (a, x) in acc.iter_mut().zip(v.as_slice()) {
            *a += c * x;
        }
    }
    DensityMatrix::symmetrized(&devectorize(&VectorizedState::new(acc))?)
}

/// `𝓛 = T diag(Λ) T⁻¹` with the metric `𝓜 = (T⁻¹)†T⁻¹`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    hilbert_dim: usize,
    pub eigenvectors: ComplexMatrix,
    pub eigenvalues: Vec<C64>,
    /// Indices with `|λ| ≤ TOL_NULL · max|λ|`.
    pub zero_indices: Vec<usize>,
    pub metric: ComplexMatrix,
    /// Condition number of `T`.
    pub condition: f64,
}

impl SpectralDecomposition {
    pub fn new(sop: &Superoperator) -> Result<Self> {
        if sop.dim() > DENSE_LIMIT {
            return Err(Error::Contract(format!(
                "spectral decomposition of a {0}x{0} superoperator is not supported; use the resolvent method",
                sop.dim()
            )));
        }
        let e = eig(&sop.to_dense())?;
        let max = e.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let zero_indices = (0..e.values.len()).filter(|&k| e.values[k].norm() <= TOL_NULL * max).collect();
        let metric = if e.condition <= SPECTRAL_CONDITION_LIMIT {
            let t_inv = solve_dense(&e.vectors, &ComplexMatrix::identity(e.vectors.rows()))?;
            &t_inv.adjoint() * &t_inv
        } else {
            ComplexMatrix::zeros(0, 0)
        };
        Ok(Self {
            hilbert_dim: sop.hilbert_dim(),
            eigenvectors: e.vectors,
            eigenvalues: e.values,
            zero_indices,
            metric,
            condition: e.condition,
        })
    }

    pub fn n(&self) -> usize {
        self.zero_indices.len()
    }
}

/// `ρ_SS = Σ_j c_j ρ_SS,j` with `c_j = ρ_SS,j† 𝓜 vec ρ₀` over zero modes.
pub fn steady_spectral(decomp: &SpectralDecomposition, rho0: &DensityMatrix) -> Result<DensityMatrix> {
    if !(decomp.condition <= SPECTRAL_CONDITION_LIMIT) {
        return Err(Error::IllConditioned { condition: decomp.condition, threshold: SPECTRAL_CONDITION_LIMIT });
    }
    if rho0.dim() != decomp.hilbert_dim {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, decomposition expects {}",
            rho0.dim(),
            decomp.hilbert_dim
        )));
    }
    let m_rho = decomp.metric.mul_vec(rho0.vectorized().as_slice());
    let modes: Vec<VectorizedState> =
        decomp.zero_indices.iter().map(|&j| VectorizedState::new(decomp.eigenvectors.column(j).to_vec())).collect();
    let c: Vec<C64> = modes.iter().map(|m| dot(m.as_slice(), &m_rho)).collect();
    combine(decomp.hilbert_dim, &modes, &c)
}

#[derive(Clone, Debug)]
pub struct ResolventOptions {
    pub epsilon: f64,
    pub solver: SolveOptions,
    /// Also solve at `ε/10` and report the trace distance between the two.
    pub two_epsilon_check: bool,
    /// Residual `‖𝓛 vec ρ_SS‖` above which a warning is logged.
    pub residual_warning: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        Self { epsilon: 1e-6, solver: SolveOptions::default(), two_epsilon_check: false, residual_warning: 1e-4 }
    }
}

impl ResolventOptions {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, ..Self::default() }
    }

    pub fn with_method(mut self, method: SolveMethod) -> Self {
        self.solver.method = method;
        self
    }
}

#[derive(Clone, Debug)]
pub struct ResolventReport {
    pub state: DensityMatrix,
    /// `‖𝓛 vec ρ_SS‖₂` of the returned state.
    pub residual: f64,
    pub iterations: usize,
    pub epsilon: f64,
    /// Trace distance to the `ε/10` solution, when requested.
    pub two_epsilon_discrepancy: Option<f64>,
}

/// Solves `(I − 𝓛/ε) x = vec ρ₀` with the default options.
pub fn steady_resolvent(sop: &Superoperator, rho0: &DensityMatrix, epsilon: f64) -> Result<DensityMatrix> {
    Ok(steady_resolvent_with(sop, rho0, &ResolventOptions::new(epsilon))?.state)
}

/// Solves `(I − 𝓛/ε) x = vec ρ₀`. The deviation from the exact steady state
/// is `O(ε/|gap|)` where `gap` is the smallest nonzero `|λ|` of `𝓛`.
///
/// The system is solved for the correction `δ = x − vec ρ₀`, i.e.
/// `(εI − 𝓛) δ = 𝓛 vec ρ₀`, whose right-hand side lies in the range of `𝓛`.
pub fn steady_resolvent_with(
    sop: &Superoperator,
    rho0: &DensityMatrix,
    opts: &ResolventOptions,
) -> Result<ResolventReport> {
    if !(opts.epsilon > 0.0) || !opts.epsilon.is_finite() {
        return Err(Error::Config(format!("ε must be positive, got {}", opts.epsilon)));
    }
    if rho0.dim() != sop.hilbert_dim() {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, Liouvillian acts on {}",
            rho0.dim(),
            sop.hilbert_dim()
        )));
    }
    let (state, iterations) = resolvent_once(sop, rho0, opts.epsilon, &opts.solver)?;
    let residual = sop.residual(state.matrix())?;
    if residual > opts.residual_warning {
        log::warn!(
            "resolvent residual ‖𝓛ρ‖ = {residual:.3e} at ε = {:.1e}; consider a smaller ε",
            opts.epsilon
        );
    }
    let two_epsilon_discrepancy = if opts.two_epsilon_check {
        let (fine, _) = resolvent_once(sop, rho0, opts.epsilon / 10.0, &opts.solver)?;
        Some(crate::state::trace_distance(&state, &fine)?)
    } else {
        None
    };
    Ok(ResolventReport { state, residual, iterations, epsilon: opts.epsilon, two_epsilon_discrepancy })
}

fn resolvent_once(
    sop: &Superoperator,
    rho0: &DensityMatrix,
    epsilon: f64,
    solver: &SolveOptions,
) -> Result<(DensityMatrix, usize)> {
    let v0 = rho0.vectorized();
    let rhs = VectorizedState::new(sop.mul_vec(v0.as_slice()));
    let mut x = v0.into_vec();
    let mut iterations = 0;
    if norm(rhs.as_slice()) > 0.0 {
        let shifted = sop.matrix().shifted(C64::new(epsilon, 0.0), C64::new(-1.0, 0.0));
        let report = solve_linear(&shifted, &rhs, solver)?;
        iterations = report.iterations;
        for (a, d) in x.iter_mut().zip(report.solution.as_slice()) {
            *a += d;
        }
    }
    let m = devectorize(&VectorizedState::new(x))?;
    Ok((DensityMatrix::symmetrized(&m)?, iterations))
}

/// Conserved quantities `Q_j = devec(𝓤_j)`: `tr(Q_j† ρ(t))` is constant.
pub fn conserved_quantities(basis: &SteadyStateBasis) -> Vec<ComplexMatrix> {
    basis.left.iter().map(|u| devectorize(u).expect("square by construction")).collect()
}

/// Steady state of every initial state in `states` against one basis.
pub fn steady_kernel_batch(basis: &SteadyStateBasis, states: &[DensityMatrix]) -> Result<Vec<DensityMatrix>> {
    states.iter().map(|s| steady_kernel(basis, s)).collect()
}

/// Kernel dimension and the basis invariants, checked against `sop`.
pub fn verify_basis(sop: &Superoperator, basis: &SteadyStateBasis) -> BasisResiduals {
    basis.residuals(sop)
}
