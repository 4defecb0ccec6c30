mod common;

use lindblad_steady::algebra::{eigh, kron, ComplexMatrix, C64, ONE, ZERO};
use lindblad_steady::metrology::{
    concurrence, qfi_balanced_mixture_closed, qfi_decay_steady_closed, qfi_dicke_closed, qfi_mixed, qfi_protocol_closed,
    qfi_protocol_sum, qfi_pure, Generator, DEFAULT_RANK_TOL,
};
use lindblad_steady::models::{self, two_qubit, TwoEnsemble};
use lindblad_steady::spins::{
    cg_balanced_closed_form, clebsch_gordan, collective_ops, generator_closed_form, generator_via_cg, p_of_s,
    psi_dif_vector, qubit_register_ops, CoupledSpinSpace, HalfInt, SpinEnsemblePair,
};
use lindblad_steady::state::DensityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn h(twice: i64) -> HalfInt {
    HalfInt::from_twice(twice)
}

fn diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).max_abs()
}

#[test]
fn two_spin_halves_match_the_qubit_register() {
    let big = collective_ops(&SpinEnsemblePair::new(1, 1).unwrap());
    let reg = qubit_register_ops(1, 1).unwrap();
    assert!(diff(&big.s_minus, &reg.s_minus) < 1e-14);
    assert!(diff(&big.s_z, &reg.s_z) < 1e-14);
    assert!(diff(&big.s_squared, &reg.s_squared) < 1e-14);
    assert!(diff(&big.differential_generator(), &reg.differential_generator()) < 1e-14);

    // σ₋ = |0⟩⟨1| on |1⟩, |0⟩
    let sm = ComplexMatrix::from_real_rows(&[&[0., 0.], &[1., 0.]]).unwrap();
    let id = ComplexMatrix::identity(2);
    let direct = &kron(&sm, &id) + &kron(&id, &sm);
    assert!(diff(&big.s_minus, &direct) < 1e-14);
    assert!(diff(&models::two_qubit_ops().s_minus, &direct) < 1e-14);
}

#[test]
fn commutation_relations() {
    for (na, nb) in [(1, 1), (3, 1), (4, 4), (6, 2), (6, 0)] {
        let ops = collective_ops(&SpinEnsemblePair::new(na, nb).unwrap());
        let zp = ops.s_z.commutator(&ops.s_plus).unwrap();
        let zm = ops.s_z.commutator(&ops.s_minus).unwrap();
        assert!(diff(&zp, &ops.s_plus) < 1e-12);
        assert!(diff(&zm, &ops.s_minus.scale_real(-1.0)) < 1e-12);
        assert!(ops.s_minus.commutator(&ops.s_squared).unwrap().max_abs() < 1e-12);
        assert!(ops.s_plus.commutator(&ops.s_squared).unwrap().max_abs() < 1e-12);
    }
}

#[test]
fn total_spin_is_diagonal_in_the_coupled_basis() {
    for n in 1..=20usize {
        for nb in (0..=n / 2).filter(|nb| (n - 2 * nb) % 2 == 0) {
            let space = CoupledSpinSpace::new(SpinEnsemblePair::new(n - nb, nb).unwrap());
            let w = space.cg_map();
            assert!(diff(&(&w.adjoint() * w), &ComplexMatrix::identity(space.dim())) < 1e-12);
            let s2 = space.to_coupled(&collective_ops(space.pair()).s_squared);
            for (k, &(s, _)) in space.labels().iter().enumerate() {
                let expected = s.value() * (s.value() + 1.0);
                assert!((s2[(k, k)].re - expected).abs() < 1e-10, "N = {n}");
            }
            let off = &s2 - &ComplexMatrix::diagonal(&(0..space.dim()).map(|k| s2[(k, k)]).collect::<Vec<_>>());
            assert!(off.max_abs() < 1e-10);
        }
    }
}

#[test]
fn all_down_has_sz_minus_half_n() {
    for (na, nb) in [(2, 2), (5, 3), (10, 10)] {
        let pair = SpinEnsemblePair::new(na, nb).unwrap();
        let ops = collective_ops(&pair);
        let k = pair.product_index(h(-(na as i64)), h(-(nb as i64))).unwrap();
        let rho = DensityMatrix::from_pure(&common::basis_vector(pair.product_dim(), k)).unwrap();
        assert!((rho.expectation(&ops.s_z).re + (na + nb) as f64 / 2.0).abs() < 1e-14);
    }
}

#[test]
fn clebsch_gordan_for_two_qubits() {
    let half = h(1);
    let c0 = clebsch_gordan(half, half, h(0), half, h(-1), h(0));
    let c1 = clebsch_gordan(half, half, h(2), half, h(-1), h(0));
    assert!((c0.value - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((c1.value - 0.5f64.sqrt()).abs() < 1e-15);
    let bad = clebsch_gordan(half, half, h(2), half, half, h(0));
    assert!(!bad.allowed && bad.value == 0.0);

    // |10⟩ = (|1,0⟩ + |0,0⟩)/√2
    let pair = SpinEnsemblePair::new(1, 1).unwrap();
    let space = CoupledSpinSpace::new(pair.clone());
    let v = space.vector_to_coupled(&psi_dif_vector(&pair, false));
    let r = 0.5f64.sqrt();
    for (k, &(s, m)) in space.labels().iter().enumerate() {
        let expected = if m.twice() == 0 { r } else { 0.0 };
        assert!((v[k] - C64::new(expected, 0.0)).norm() < 1e-15, "S = {s}, M = {m}");
    }
    let p = p_of_s(&pair);
    assert_eq!(p.len(), 2);
    assert!(p.iter().all(|(_, x)| (x - 0.5).abs() < 1e-15));
}

#[test]
fn clebsch_gordan_columns_are_normalized() {
    for tj1 in 0..=6i64 {
        for tj2 in 0..=tj1 {
            for tj in ((tj1 - tj2)..=(tj1 + tj2)).step_by(2) {
                for tm in (-tj..=tj).step_by(2) {
                    let mut total = 0.0;
                    for tm1 in (-tj1..=tj1).step_by(2) {
                        total += clebsch_gordan(h(tj1), h(tj2), h(tj), h(tm1), h(tm - tm1), h(tm)).value.powi(2);
                    }
                    assert!((total - 1.0).abs() < 1e-13);
                }
            }
        }
    }
}

#[test]
fn overlap_distribution_sums_to_one_and_matches_closed_form() {
    for n in (2..=60).step_by(2) {
        let pair = SpinEnsemblePair::balanced(n).unwrap();
        let p = p_of_s(&pair);
        let total: f64 = p.iter().map(|(_, x)| x).sum();
        assert!((total - 1.0).abs() < 1e-12, "N = {n}");
        let q = h(n as i64 / 2);
        for (s, ps) in &p {
            let general = clebsch_gordan(q, q, *s, q, h(-(n as i64) / 2), h(0)).value;
            let closed = cg_balanced_closed_form(n, (s.twice() / 2) as usize).unwrap();
            assert!((general - closed).abs() < 1e-12, "N = {n}, S = {s}");
            assert!((general * general - ps).abs() < 1e-12);
        }
    }
}

#[test]
fn flipped_state_has_the_same_distribution() {
    for (n, eta) in [(4, 0), (8, 2), (12, 3), (20, 4)] {
        let system = TwoEnsemble::with_imbalance(n, eta).unwrap();
        let pops = |flipped| system.sector_populations(&system.psi_dif(flipped));
        let (a, b) = (pops(false), pops(true));
        let p = p_of_s(system.pair());
        for ((sa, xa), (sb, xb)) in a.iter().zip(&b) {
            assert_eq!(sa, sb);
            assert!((xa - xb).abs() < 1e-12);
            let expected = p.iter().find(|(s, _)| s == sa).map(|(_, x)| *x).unwrap_or(0.0);
            assert!((xa - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn distribution_peak_scales_like_root_n() {
    for n in [16, 36, 64, 100] {
        let p = p_of_s(&SpinEnsemblePair::balanced(n).unwrap());
        let (s, _) = p.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let ratio = s.value() / (n as f64).sqrt();
        assert!((0.3..=1.2).contains(&ratio), "N = {n}: {ratio}");
    }
}

#[test]
fn imbalance_moves_support_start() {
    for eta in 0..=5 {
        let p = p_of_s(&SpinEnsemblePair::with_imbalance(20, eta).unwrap());
        assert_eq!(p.first().unwrap().0, HalfInt::integer(eta as i64));
        assert!(p[0].1 > 0.0);
        assert_eq!(p.last().unwrap().0, HalfInt::integer(10));
    }
}

#[test]
fn generator_in_the_coupled_basis() {
    let space = CoupledSpinSpace::new(SpinEnsemblePair::balanced(2).unwrap());
    let g = generator_closed_form(&space);
    let (a, b) = (space.index_of(h(0), h(0)).unwrap(), space.index_of(h(2), h(0)).unwrap());
    assert!((g[(a, b)].re - 1.0).abs() < 1e-15);

    for n in (2..=12).step_by(2) {
        let space = CoupledSpinSpace::new(SpinEnsemblePair::balanced(n).unwrap());
        let closed = generator_closed_form(&space);
        let via = generator_via_cg(&space);
        assert!(diff(&closed, &via) < 1e-10, "N = {n}");
    }
    // with unequal sizes the diagonal ΔS = 0 entries appear as well
    for (n, eta) in [(8, 0), (12, 0), (10, 2), (12, 1)] {
        let space = CoupledSpinSpace::new(SpinEnsemblePair::with_imbalance(n, eta).unwrap());
        let g = generator_via_cg(&space);
        for (r, &(s1, m1)) in space.labels().iter().enumerate() {
            for (c, &(s2, m2)) in space.labels().iter().enumerate() {
                let ds = (s1.twice() - s2.twice()).abs();
                if m1 != m2 || !(ds == 2 || (eta > 0 && ds == 0)) {
                    assert!(g[(r, c)].norm() < 1e-12, "N = {n}, η = {eta}");
                }
            }
        }
    }
}

fn matrix_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    let e = eigh(&m.hermitian_part()).unwrap();
    let d: Vec<C64> = e.values.iter().map(|x| C64::new(x.max(0.0).sqrt(), 0.0)).collect();
    &(&e.vectors * &ComplexMatrix::diagonal(&d)) * &e.vectors.adjoint()
}

/// `max(0, λ₁−λ₂−λ₃−λ₄)` with `λ` the eigenvalues of `√(√ρ ρ̃ √ρ)`.
fn concurrence_oracle(rho: &DensityMatrix) -> f64 {
    let sy = ComplexMatrix::from_rows(&[vec![ZERO, C64::new(0.0, -1.0)], vec![C64::new(0.0, 1.0), ZERO]]).unwrap();
    let yy = kron(&sy, &sy);
    let tilde = &(&yy * &rho.matrix().conj()) * &yy;
    let root = matrix_sqrt(rho.matrix());
    let r = matrix_sqrt(&(&(&root * &tilde) * &root));
    let mut l = eigh(&r.hermitian_part()).unwrap().values;
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

#[test]
fn concurrence_examples() {
    assert!((concurrence(&two_qubit::phi_minus()).unwrap() - 1.0).abs() < 1e-7);
    assert!(concurrence(&two_qubit::up_up()).unwrap() < 1e-12);
    assert!(concurrence(&DensityMatrix::maximally_mixed(4)).unwrap() < 1e-12);
    assert!(concurrence(&DensityMatrix::maximally_mixed(2)).is_err());
    // Werner-like mixtures of the singlet
    for c2 in [0.1, 0.5, 0.6, 0.9] {
        let rho = common::mix(&two_qubit::phi_minus(), &DensityMatrix::maximally_mixed(4), (4.0 * c2 - 1.0) / 3.0);
        let expected = (2.0 * c2 - 1.0f64).max(0.0);
        assert!((concurrence(&rho).unwrap() - expected).abs() < 1e-6, "c₂ = {c2}");
    }
}

#[test]
fn concurrence_agrees_with_the_square_root_definition() {
    let mut states = common::states(21, 4, 70);
    states.extend(common::pure_states(22, 4, 30));
    for rho in &states {
        let (a, b) = (concurrence(rho).unwrap(), concurrence_oracle(rho));
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn dicke_qfi_examples() {
    for n in [4, 8, 12, 16] {
        let system = TwoEnsemble::balanced(n).unwrap();
        let g = Generator::differential(system.generator().clone()).unwrap();
        for ts in (0..=n as i64).step_by(2) {
            for tm in (-ts..=ts).step_by(2) {
                let v = system.dicke_vector(h(ts), h(tm)).unwrap();
                let numeric = qfi_pure(&v, &g).unwrap();
                let closed = qfi_dicke_closed(n, (ts / 2) as usize, tm / 2).unwrap();
                assert!((numeric - closed).abs() <= 1e-8 * closed.abs().max(1.0), "N = {n}, S = {}", ts / 2);
                assert!(numeric <= (n * n) as f64 + 1e-6);
            }
        }
        let zero = qfi_pure(&system.dicke_vector(h(0), h(0)).unwrap(), &g).unwrap();
        assert!((zero - ((n * n + 4 * n) as f64 / 3.0)).abs() < 1e-9);
        let down = system.dicke_vector(HalfInt::integer(n as i64 / 2), HalfInt::integer(-(n as i64) / 2)).unwrap();
        assert!(qfi_pure(&down, &g).unwrap() < 1e-12);
    }
    assert!((qfi_dicke_closed(4, 0, 0).unwrap() - 32.0 / 3.0).abs() < 1e-12);
    assert!((qfi_dicke_closed(60, 0, 0).unwrap() - 1280.0).abs() < 1e-9);

    let system = TwoEnsemble::balanced(60).unwrap();
    let g = Generator::differential(system.generator().clone()).unwrap();
    for (s, m) in [(5, -5), (0, 0)] {
        let numeric = qfi_pure(&system.dicke_vector(HalfInt::integer(s), HalfInt::integer(m)).unwrap(), &g).unwrap();
        let closed = qfi_dicke_closed(60, s as usize, m).unwrap();
        assert!((numeric - closed).abs() <= 1e-8 * closed, "{numeric} vs {closed}");
    }
}

#[test]
fn mixed_qfi_examples() {
    let system = TwoEnsemble::balanced(4).unwrap();
    let g = Generator::differential(system.generator().clone()).unwrap();
    let b1 = qfi_mixed(&system.balanced_mixture(HalfInt::integer(1)).unwrap(), &g, DEFAULT_RANK_TOL).unwrap();
    assert!((b1.value - 8.0).abs() < 1e-10);
    assert_eq!(b1.rank_used, 3);
    assert!(b1.correction.abs() <= 1e-10);

    let two = TwoEnsemble::balanced(2).unwrap();
    let g2 = Generator::differential(two.generator().clone()).unwrap();
    let ss = qfi_mixed(&two.decay_steady_state().unwrap(), &g2, DEFAULT_RANK_TOL).unwrap();
    assert!((ss.value - 2.0).abs() < 1e-10);
    assert!(ss.correction.abs() <= 1e-10);

    let v = system.psi_dif_vector(false);
    let pure = qfi_mixed(&DensityMatrix::from_pure(&v).unwrap(), &g, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(pure.rank_used, 1);
    assert!((pure.value - qfi_pure(&v, &g).unwrap()).abs() < 1e-10);
}

#[test]
fn balanced_mixture_closed_form() {
    for n in [4, 8, 12, 16] {
        let system = TwoEnsemble::balanced(n).unwrap();
        let g = Generator::differential(system.generator().clone()).unwrap();
        for s in 0..=n / 2 {
            let rho = system.balanced_mixture(HalfInt::integer(s as i64)).unwrap();
            let numeric = qfi_mixed(&rho, &g, DEFAULT_RANK_TOL).unwrap();
            let closed = qfi_balanced_mixture_closed(n, s).unwrap();
            assert!(closed >= 0.0);
            assert!((numeric.value - closed).abs() <= 1e-8 * closed.max(1.0), "N = {n}, S = {s}");
            assert!(numeric.correction.abs() <= 1e-10);
        }
        let steady = qfi_mixed(&system.decay_steady_state().unwrap(), &g, DEFAULT_RANK_TOL).unwrap();
        assert!(steady.correction.abs() <= 1e-10);
        assert!((steady.value - qfi_decay_steady_closed(n).unwrap()).abs() <= 1e-8 * steady.value.max(1.0));
    }
}

#[test]
fn protocol_qfi_identity_and_scaling() {
    assert!((qfi_protocol_closed(2).unwrap() - 8.0 / 3.0).abs() < 1e-14);
    assert!((qfi_protocol_closed(4).unwrap() - 8.0).abs() < 1e-14);
    assert!((qfi_protocol_closed(60).unwrap() - 1240.0).abs() < 1e-10);
    for n in (2..=60).step_by(2) {
        let closed = qfi_protocol_closed(n).unwrap();
        assert!((qfi_protocol_sum(n).unwrap() - closed).abs() <= 1e-10 * closed, "N = {n}");
    }
    let ratios: Vec<f64> = [20, 40, 100, 400, 2000].iter().map(|&n| qfi_protocol_closed(n).unwrap() / (n * n) as f64).collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]));
    assert!((ratios.last().unwrap() - 1.0 / 3.0).abs() < 1e-3);
    assert!(qfi_protocol_closed(5).is_err());
}

#[test]
fn decay_steady_qfi_is_sub_heisenberg() {
    let per_n2: Vec<f64> = (8..=40)
        .step_by(2)
        .map(|n| qfi_decay_steady_closed(n).unwrap() / (n * n) as f64)
        .collect();
    assert!(per_n2.windows(2).all(|w| w[1] < w[0]), "{per_n2:?}");
}

#[test]
fn dicke_qfi_falls_with_total_spin() {
    for n in [8, 20, 60] {
        let f: Vec<f64> = (0..=n / 2).map(|s| qfi_dicke_closed(n, s, -(s as i64)).unwrap()).collect();
        assert!(f.windows(2).all(|w| w[1] < w[0]), "N = {n}");
    }
}

fn random_qubit(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    [C64::new((theta / 2.0).cos(), 0.0), C64::from_polar((theta / 2.0).sin(), phi)]
}

#[test]
fn product_states_respect_the_standard_quantum_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for &(na, nb) in [(1, 1), (2, 2), (3, 1), (4, 4)].iter().cycle().take(100) {
        let n = na + nb;
        let g = Generator::differential(qubit_register_ops(na, nb).unwrap().differential_generator()).unwrap();
        let mut psi = vec![ONE];
        for _ in 0..n {
            let q = random_qubit(&mut rng);
            psi = psi.iter().flat_map(|a| q.iter().map(move |b| a * b)).collect();
        }
        let f = qfi_pure(&psi, &g).unwrap();
        assert!(f <= n as f64 + 1e-8, "{f} > {n}");
    }
}

#[test]
fn register_and_big_spin_qfi_agree() {
    // |ψ_dif⟩ on the register is |1..1⟩ ⊗ |0..0⟩, i.e. index 2^{N_B}·(2^{N_A} − 1)
    for (na, nb) in [(2, 2), (3, 1)] {
        let reg = qubit_register_ops(na, nb).unwrap();
        let g = Generator::differential(reg.differential_generator()).unwrap();
        let dim = 1usize << (na + nb);
        let psi = common::basis_vector(dim, ((1 << na) - 1) << nb);
        let pair = SpinEnsemblePair::new(na, nb).unwrap();
        let big = Generator::differential(collective_ops(&pair).differential_generator()).unwrap();
        let a = qfi_pure(&psi, &g).unwrap();
        let b = qfi_pure(&psi_dif_vector(&pair, false), &big).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
