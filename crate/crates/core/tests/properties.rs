use floquet_core::dense::{commutator as dense_commutator, spectral_norm};
use floquet_core::ladder::{mirror_transform, odd_operator, odd_operator_2};
use floquet_core::observables::entanglement_entropy;
use floquet_core::{commutator, pauli_mul, to_dense, LadderConfig, OperatorSum, Pauli, PauliString, StateVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 3;

fn pauli() -> impl Strategy<Value = Option<Pauli>> {
    prop_oneof![Just(None), Just(Some(Pauli::X)), Just(Some(Pauli::Y)), Just(Some(Pauli::Z))]
}

fn string() -> impl Strategy<Value = PauliString> {
    (prop::collection::vec(pauli(), N), -2.0..2.0f64, -2.0..2.0f64).prop_map(|(ops, re, im)| {
        let ops: Vec<(usize, Pauli)> = ops.into_iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, p))).collect();
        PauliString::new(Complex64::new(re, im), &ops)
    })
}

fn sum() -> impl Strategy<Value = OperatorSum> {
    prop::collection::vec(string(), 0..6).prop_map(|terms| OperatorSum::from_terms(N, terms).unwrap())
}

fn hermitian_sum() -> impl Strategy<Value = OperatorSum> {
    sum().prop_map(|s| (s.clone() + s.dagger()).scaled(0.5))
}

fn dense_of_string(s: &PauliString) -> DMatrix<Complex64> {
    to_dense(&OperatorSum::from_terms(N, vec![s.clone()]).unwrap()).unwrap()
}

fn state(n: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n).prop_filter_map("nonzero", move |v| {
        let amps: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let mut psi = StateVector::from_amps(n, amps).ok()?;
        (psi.norm() > 1e-3).then(|| {
            psi.normalize();
            psi
        })
    })
}

/// Random 2x2 unitary from three angles.
fn qubit_unitary(a: f64, b: f64, c: f64) -> [[Complex64; 2]; 2] {
    let (s, co) = b.sin_cos();
    [
        [Complex64::from_polar(co, a), Complex64::from_polar(s, c)],
        [-Complex64::from_polar(s, -c), Complex64::from_polar(co, -a)],
    ]
}

fn apply_qubit(psi: &StateVector, q: usize, u: [[Complex64; 2]; 2]) -> StateVector {
    let mut amps = psi.amps().to_vec();
    let bit = 1 << q;
    for i in 0..amps.len() {
        if i & bit == 0 {
            let (a0, a1) = (amps[i], amps[i | bit]);
            amps[i] = u[0][0] * a0 + u[0][1] * a1;
            amps[i | bit] = u[1][0] * a0 + u[1][1] * a1;
        }
    }
    StateVector::from_amps(psi.n_sites(), amps).unwrap()
}

fn reverse_qubits(psi: &StateVector) -> StateVector {
    let n = psi.n_sites();
    let amps = (0..1usize << n)
        .map(|i| {
            let j = (0..n).fold(0, |acc, q| acc | (((i >> q) & 1) << (n - 1 - q)));
            psi.amps()[j]
        })
        .collect();
    StateVector::from_amps(n, amps).unwrap()
}

proptest! {
    #[test]
    fn string_product_is_associative(a in string(), b in string(), c in string()) {
        let left = pauli_mul(&pauli_mul(&a, &b), &c);
        let right = pauli_mul(&a, &pauli_mul(&b, &c));
        prop_assert!((left.coeff - right.coeff).norm() < 1e-12);
        prop_assert_eq!(left.ops(), right.ops());
    }

    #[test]
    fn string_product_matches_matrices(a in string(), b in string()) {
        let diff = dense_of_string(&pauli_mul(&a, &b)) - dense_of_string(&a) * dense_of_string(&b);
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn simplify_preserves_matrix(s in sum()) {
        let diff = to_dense(&s.simplify()).unwrap() - to_dense(&s).unwrap();
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn dense_form_is_linear(a in sum(), b in sum(), x in -3.0..3.0f64) {
        let combined = to_dense(&(a.scaled(x) + b.clone())).unwrap();
        let expected = to_dense(&a).unwrap() * Complex64::new(x, 0.0) + to_dense(&b).unwrap();
        prop_assert!((combined - expected).norm() < 1e-10);
    }

    #[test]
    fn commutator_of_hermitian_is_antihermitian(a in hermitian_sum(), b in hermitian_sum()) {
        let c = to_dense(&commutator(&a, &b).unwrap()).unwrap();
        prop_assert!((&c + c.adjoint()).norm() < 1e-10);
        let direct = dense_commutator(&to_dense(&a).unwrap(), &to_dense(&b).unwrap());
        prop_assert!(spectral_norm(&(c - direct)) < 1e-10);
    }

    #[test]
    fn entropy_ignores_one_sided_local_unitaries(
        psi in state(4),
        q in 0usize..4,
        angles in (0.0..6.3f64, 0.0..6.3f64, 0.0..6.3f64),
    ) {
        let before = entanglement_entropy(&psi, 2).unwrap();
        let rotated = apply_qubit(&psi, q, qubit_unitary(angles.0, angles.1, angles.2));
        prop_assert!((entanglement_entropy(&rotated, 2).unwrap() - before).abs() < 1e-10);
    }

    #[test]
    fn entropy_is_symmetric_in_the_cut(psi in state(5), cut in 1usize..5) {
        let a = entanglement_entropy(&psi, cut).unwrap();
        let b = entanglement_entropy(&reverse_qubits(&psi), 5 - cut).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        prop_assert!(a >= 0.0 && a <= (cut.min(5 - cut) as f64) * std::f64::consts::LN_2 + 1e-10);
    }

    #[test]
    fn odd_operators_flip_under_mirror(la in 0.1..1.5f64, lb in 0.1..1.5f64, half in 2usize..6) {
        let cfg = LadderConfig::reference(2 * half, 8.0 * std::f64::consts::PI).with_lambdas(la, lb);
        for op in [odd_operator(&cfg), odd_operator_2(&cfg)] {
            let flipped = mirror_transform(&op, cfg.l);
            prop_assert_eq!(flipped.max_difference(&op.scaled(-1.0)), 0.0);
            prop_assert_eq!(mirror_transform(&flipped, cfg.l).max_difference(&op), 0.0);
        }
    }
}

#[test]
fn haar_state_entropy_near_page_mean() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 12;
    let mut total = 0.0;
    let samples = 5;
    for _ in 0..samples {
        let amps = (0..1 << n)
            .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let mut psi = StateVector::from_amps(n, amps).unwrap();
        psi.normalize();
        total += entanglement_entropy(&psi, n / 2).unwrap();
    }
    let mean = total / samples as f64;
    // Page: ln d_A - d_A / (2 d_B) for equal halves
    let page = 6.0 * std::f64::consts::LN_2 - 0.5;
    assert!((mean / page - 1.0).abs() < 0.15, "{mean} vs {page}");
}
