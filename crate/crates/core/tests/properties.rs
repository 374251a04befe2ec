//! Property tests for the algebraic invariants the synthesis pipeline
//! relies on: the purity functional's floor and its characterization of
//! roots of the identity, propagator group structure, sequence composition,
//! and determinism of the randomized search.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonholo_core::control::HamiltonianPair;
use nonholo_core::linalg::{
    expm_hermitian, gate_fidelity, poly_purity, HermitianMatrix, UnitaryMatrix,
};
use nonholo_core::{find_identity_root, sequence_unitary, PulseSequence, RootOptions};

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let m = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    HermitianMatrix::new((&m + m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> UnitaryMatrix {
    expm_hermitian(&random_hermitian(n, rng), rng.gen_range(0.1..3.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// F_N = sum |a_j|^2 over the characteristic polynomial never drops
    /// below 2 on the unitary group (|a_0| = |a_N| = 1).
    #[test]
    fn purity_is_at_least_two(n in 3usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(n, &mut rng);
        prop_assert!(poly_purity(&u) >= 2.0 - 1e-9);
    }

    /// A nondegenerate N-th root of the identity, conjugated into a random
    /// basis and multiplied by a random global phase, sits exactly on the
    /// purity floor.
    #[test]
    fn purity_floor_is_reached_on_roots(n in 3usize..=8, seed in any::<u64>(), phase in 0.0..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_unitary(n, &mut rng);
        let omega = Complex64::from_polar(1.0, std::f64::consts::TAU / n as f64);
        let d = DMatrix::from_fn(n, n, |i, j| {
            if i == j { omega.powu(i as u32) } else { Complex64::default() }
        });
        let root = v.matrix() * d * v.matrix().adjoint() * Complex64::from_polar(1.0, phase);
        let root = UnitaryMatrix::new(root).unwrap();
        prop_assert!((poly_purity(&root) - 2.0).abs() <= 1e-9);
    }

    /// e^{-iH(s+t)} = e^{-iHs} e^{-iHt}.
    #[test]
    fn propagator_composes(seed in any::<u64>(), s in 0.0..5.0f64, t in 0.0..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(4, &mut rng);
        let both = expm_hermitian(&h, s + t).unwrap();
        let split = expm_hermitian(&h, s).unwrap().matrix() * expm_hermitian(&h, t).unwrap().matrix();
        prop_assert!((both.matrix() - split).norm() <= 1e-12);
    }

    /// Repeating a sequence with an even slot count squares its unitary,
    /// and total duration is additive.
    #[test]
    fn repetition_squares_the_unitary(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h_a = random_hermitian(4, &mut rng);
        let h_b = random_hermitian(4, &mut rng);
        let pair = HamiltonianPair::new(h_a, h_b).unwrap();
        let durations: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..2.0)).collect();
        let seq = PulseSequence::from_durations(durations).unwrap();
        let twice = seq.repeated(2);
        prop_assert_eq!(twice.durations().len(), 8);
        prop_assert!((twice.total_duration_au() - 2.0 * seq.total_duration_au()).abs() <= 1e-12);
        let u = sequence_unitary(&seq, &pair);
        let u2 = sequence_unitary(&twice, &pair);
        prop_assert!((u2.matrix() - u.matrix() * u.matrix()).norm() <= 1e-12);
    }

    /// Fidelity is normalized to [0, 1] and blind to a global phase.
    #[test]
    fn fidelity_is_phase_invariant(n in 2usize..=6, seed in any::<u64>(), phase in 0.0..std::f64::consts::TAU) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(n, &mut rng);
        let v = random_unitary(n, &mut rng);
        let f = gate_fidelity(&u, &v).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        let vp = UnitaryMatrix::new(v.matrix() * Complex64::from_polar(1.0, phase)).unwrap();
        let fp = gate_fidelity(&u, &vp).unwrap();
        prop_assert!((f - fp).abs() <= 1e-12);
    }
}

/// The randomized root search is a pure function of its seed.
#[test]
fn root_search_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h_a = random_hermitian(4, &mut rng);
    let h_b = random_hermitian(4, &mut rng);
    let pair = HamiltonianPair::new(h_a, h_b).unwrap();
    let scale = std::f64::consts::PI / pair.h_a().spectral_norm();
    let opts = RootOptions::default();
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        find_identity_root(&pair, &mut rng, scale, &opts).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.timings, b.timings);
    assert_eq!(a.restarts_used, b.restarts_used);
}
