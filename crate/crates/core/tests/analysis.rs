//! Ensemble machinery: Haar sampling, cluster statistics, residue
//! histograms, the linearization oracle and pole matching.

mod common;

use common::{attenuated_with, lossless_with, reference_attenuation_spec, solve_fully};
use fdn_modal_core::analysis::{
    cluster_numbers, derive_seed, equidistributed_cluster_histogram, histogram_db,
    lossless_cluster_ensemble, match_pole_sets, oracle_poles, poisson_cluster_reference,
    random_lossless_fdn, random_orthogonal, residue_magnitudes_db,
    uniform_random_cluster_histogram, AnalysisError, LosslessEnsembleSpec, ResidueKind,
};
use fdn_modal_core::fdn::{circular_shift_matrix, FdnSystem};
use fdn_modal_core::linalg::{eigenvalues_dense, singular_values, ComplexMatrix};
use fdn_modal_core::modal::residues;
use fdn_modal_core::Complex64;
use proptest::prelude::*;

/// Roots of the explicitly expanded characteristic polynomial, via its
/// companion matrix. Third pole-finding route, independent of both the
/// iteration and the delay-state linearization.
fn companion_roots(sys: &FdnSystem) -> Vec<Complex64> {
    let coeffs = sys.gcp_coefficients().unwrap();
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut companion = ComplexMatrix::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = Complex64::ONE;
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coeffs[i] / lead;
    }
    eigenvalues_dense(&companion).unwrap()
}

#[test]
fn linearization_oracle_agrees_with_companion_roots() {
    for seed in 0..5 {
        let sys = random_lossless_fdn(1 + (seed as usize % 4), 3, 16, 900 + seed).unwrap();
        let oracle = oracle_poles(&sys).unwrap();
        let companion = companion_roots(&sys);
        let matched = match_pole_sets(&oracle, &companion).unwrap();
        assert!(
            matched.max_distance < 1e-8,
            "seed {seed}: {:.3e}",
            matched.max_distance
        );
    }
}

#[test]
fn oracle_rejects_oversized_systems() {
    let sys = lossless_with(vec![300, 301], circular_shift_matrix(2));
    match oracle_poles(&sys) {
        Err(AnalysisError::OracleTooLarge { states }) => assert_eq!(states, 601),
        other => panic!("expected size rejection, got {other:?}"),
    }
}

#[test]
fn assignment_is_globally_optimal_not_greedy() {
    // Nearest-first pairing would take 10→9 then be forced into 0→11
    // (mean 6); the optimal pairing is 0→9, 10→11 (mean 5).
    let a = [Complex64::new(0.0, 0.0), Complex64::new(10.0, 0.0)];
    let b = [Complex64::new(9.0, 0.0), Complex64::new(11.0, 0.0)];
    let m = match_pole_sets(&a, &b).unwrap();
    assert_eq!(m.assignment, vec![0, 1]);
    assert!((m.mean_distance - 5.0).abs() < 1e-12);
    assert!((m.max_distance - 9.0).abs() < 1e-12);
}

#[test]
fn large_sets_use_the_angular_fast_path_correctly() {
    // Above the dense-assignment cutoff the matcher switches to the
    // angular heuristic; on a perturbed shuffled ring it must still
    // recover the true pairing.
    let n = 700usize;
    let a: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, core::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    let mut b: Vec<Complex64> = a
        .iter()
        .enumerate()
        .map(|(k, &z)| z * Complex64::from_polar(1.0 + 1e-9, 1e-9 * ((k % 7) as f64 - 3.0)))
        .collect();
    // Deterministic shuffle: index bit-reversal-ish permutation.
    let perm: Vec<usize> = (0..n).map(|k| (k * 389) % n).collect();
    b = perm.iter().map(|&p| b[p]).collect();
    let m = match_pole_sets(&a, &b).unwrap();
    assert!(m.max_distance < 1e-8, "{:.3e}", m.max_distance);
    // Assignment is the inverse of the shuffle.
    for (i, &j) in m.assignment.iter().enumerate() {
        assert_eq!(perm[j], i);
    }
}

#[test]
fn equidistributed_angles_have_cluster_number_one() {
    // Power-of-two order: the turn arithmetic is exact, so every window
    // holds exactly one pole.
    let h = equidistributed_cluster_histogram(4096, 4096);
    assert_eq!(h.probabilities, [0.0, 1.0, 0.0, 0.0, 0.0]);
}

#[test]
fn uniform_angles_follow_the_poisson_reference() {
    let h = uniform_random_cluster_histogram(2048, 2048, 12, 0x7a11);
    let diff = h.max_abs_diff(&poisson_cluster_reference());
    assert!(diff < 0.02, "max deviation {diff:.4}");
    let sum: f64 = h.probabilities.iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

#[test]
fn window_width_follows_the_order_parameter() {
    // Two antipodal poles with order 2: every window of width π holds
    // exactly one. With order 8 (window π/4), most probes see none.
    let angles = [0.0, core::f64::consts::PI];
    let wide = cluster_numbers(&angles, 2, 64);
    assert_eq!(wide.probabilities[1], 1.0);
    let narrow = cluster_numbers(&angles, 8, 64);
    assert!(narrow.probabilities[0] > 0.7);
}

#[test]
fn lossless_ensemble_is_deterministic_and_normalized() {
    let spec = LosslessEnsembleSpec {
        size: 4,
        delay_min: 20,
        delay_max: 60,
        trials: 10,
        probe_factor: 1,
        sweep_cap: Some(200),
    };
    let h1 = lossless_cluster_ensemble(&spec, 42).unwrap();
    let h2 = lossless_cluster_ensemble(&spec, 42).unwrap();
    assert_eq!(h1.probabilities, h2.probabilities);
    assert_eq!(h1.trials, 10);
    let sum: f64 = h1.probabilities.iter().sum();
    assert!((sum - 1.0).abs() < 1e-12);
    // A different master seed draws different systems.
    let h3 = lossless_cluster_ensemble(&spec, 43).unwrap();
    assert!(h1.probabilities != h3.probabilities);
}

#[test]
fn shift_fdn_residue_magnitudes_fill_a_single_bin() {
    // b = c = e₁ through a circular shift: the impulse response is a
    // pure N̂-periodic comb, so every total residue has magnitude 1/N̂
    // and the histogram collapses to one bin.
    let n = 4usize;
    let mut b = vec![Complex64::ZERO; n];
    let mut c = vec![Complex64::ZERO; n];
    b[0] = Complex64::ONE;
    c[0] = Complex64::ONE;
    let sys = FdnSystem::new(
        vec![4; n],
        circular_shift_matrix(n),
        b,
        c,
        Complex64::ZERO,
    )
    .unwrap();
    let (poles, _) = solve_fully(&sys);
    let dec = residues(&sys, &poles).unwrap();
    let values = residue_magnitudes_db(&dec, ResidueKind::Driven, None).unwrap();
    assert_eq!(values.len(), sys.order());
    let expect = 20.0 * (1.0 / sys.order() as f64).log10();
    for v in &values {
        assert!((v - expect).abs() < 1e-9);
    }
    let h = histogram_db(&values, 5.0).unwrap();
    assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
    assert_eq!(h.total(), sys.order() as u64);
    assert_eq!(h.skipped_zeros, 0);
}

#[test]
fn attenuated_residue_histogram_spreads_but_stays_finite() {
    let spec = reference_attenuation_spec();
    let sys = attenuated_with(vec![53, 67, 71, 83], random_orthogonal(4, 5), &spec);
    let (poles, _) = solve_fully(&sys);
    let dec = residues(&sys, &poles).unwrap();
    let values = residue_magnitudes_db(&dec, ResidueKind::UndrivenInverse, None).unwrap();
    assert_eq!(values.len(), sys.order());
    let h = histogram_db(&values, 5.0).unwrap();
    assert_eq!(h.total(), sys.order() as u64);
    // Bin edges snap to multiples of the width.
    let lo = h.bin_lower(0) / 5.0;
    assert!((lo - lo.round()).abs() < 1e-12);
    let probability_sum: f64 = (0..h.counts.len()).map(|i| h.probability(i)).sum();
    assert!((probability_sum - 1.0).abs() < 1e-12);
}

#[test]
fn derived_seeds_do_not_collide_in_small_ranges() {
    let mut seen = std::collections::HashSet::new();
    for master in [0u64, 1, 42, u64::MAX] {
        for idx in 0..1000 {
            seen.insert(derive_seed(master, idx));
        }
    }
    assert_eq!(seen.len(), 4000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn haar_matrices_are_orthogonal(n in 1usize..10, seed in any::<u64>()) {
        let q = random_orthogonal(n, seed);
        let gram = &q.conj_transpose() * &q;
        prop_assert!(gram.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
        let sv = singular_values(&q).unwrap();
        for s in sv {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
        // Real entries only.
        for z in q.data() {
            prop_assert!(z.im == 0.0);
        }
        if n == 1 {
            prop_assert!((q[(0, 0)].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn random_lossless_systems_respect_their_delay_range(
        size in 1usize..6,
        seed in any::<u64>(),
    ) {
        let sys = random_lossless_fdn(size, 10, 30, seed).unwrap();
        prop_assert_eq!(sys.size(), size);
        for &m in sys.delays() {
            prop_assert!((10..=30).contains(&m));
        }
        let sv = singular_values(sys.feedback()).unwrap();
        for s in sv {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cluster_probabilities_always_sum_to_one(
        order in 2usize..40,
        probes in 1usize..50,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let angles: Vec<f64> = (0..order)
            .map(|_| rng.random_range(-core::f64::consts::PI..core::f64::consts::PI))
            .collect();
        let h = cluster_numbers(&angles, order, probes);
        let sum: f64 = h.probabilities.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.probes, probes);
    }
}
