//! Attenuation filters and magnitude bounds against closed forms and the
//! augmented linearization oracle.

mod common;

use common::{attenuated_with, lossless_with, reference_attenuation_spec, solve_fully, unit_gains};
use fdn_modal_core::analysis::{match_pole_sets, oracle_poles, random_orthogonal};
use fdn_modal_core::attenuation::{
    design_one_pole, gamma_from_t60, magnitude_bounds, mode_t60, t60_from_gamma, AttenuationMode,
    AttenuationSpec, MagnitudeBounds, OnePoleFilter,
};
use fdn_modal_core::fdn::FdnSystem;
use fdn_modal_core::linalg::ComplexMatrix;
use fdn_modal_core::Complex64;
use proptest::prelude::*;

/// Diagonal feedback with delays 1 and 2 plus identical one-pole filters
/// has closed-form poles: line 1 gives `z = p + a·g(1−p)`, line 2 the
/// roots of `z² − pz − a·g(1−p)`.
#[test]
fn filtered_diagonal_system_matches_the_quadratic_closed_form() {
    let g = 0.95f64;
    let p = 0.2f64;
    let (a1, a2) = (0.8f64, -0.6f64);
    let mut feedback = ComplexMatrix::zeros(2, 2);
    feedback[(0, 0)] = Complex64::new(a1, 0.0);
    feedback[(1, 1)] = Complex64::new(a2, 0.0);
    let filter = OnePoleFilter::new(g, p).unwrap();
    let sys = FdnSystem::with_filters(
        vec![1, 2],
        feedback,
        unit_gains(2),
        unit_gains(2),
        Complex64::ZERO,
        vec![filter, filter],
    )
    .unwrap();
    let (poles, _) = solve_fully(&sys);

    let k1 = a1 * g * (1.0 - p);
    let root1 = Complex64::new(p + k1, 0.0);
    let k2 = a2 * g * (1.0 - p);
    let disc = Complex64::new(p * p + 4.0 * k2, 0.0).sqrt();
    let root2a = (Complex64::new(p, 0.0) + disc) * 0.5;
    let root2b = (Complex64::new(p, 0.0) - disc) * 0.5;
    let expect = [root1, root2a, root2b];
    let matched = match_pole_sets(&poles.poles, &expect).unwrap();
    assert!(matched.max_distance < 1e-10, "{:.3e}", matched.max_distance);
}

#[test]
fn filtered_poles_match_the_augmented_oracle() {
    let spec = reference_attenuation_spec();
    for seed in 0..4 {
        let delays = vec![
            5 + seed as usize,
            9,
            11 + 2 * (seed as usize % 3),
            14,
        ];
        let sys = attenuated_with(delays, random_orthogonal(4, 100 + seed), &spec);
        let (poles, _) = solve_fully(&sys);
        let oracle = oracle_poles(&sys).unwrap();
        assert_eq!(oracle.len(), sys.order());
        let matched = match_pole_sets(&poles.poles, &oracle).unwrap();
        assert!(
            matched.max_distance < 1e-8,
            "seed {seed}: {:.3e}",
            matched.max_distance
        );
    }
}

#[test]
fn homogeneous_attenuation_scales_magnitudes_only() {
    let t60 = 1.7f64;
    let fs = 48_000.0;
    let gamma = gamma_from_t60(t60, fs);
    let delays = vec![23usize, 31, 41, 57];
    let feedback = random_orthogonal(4, 7);
    let lossless = lossless_with(delays.clone(), feedback.clone());
    let filters = delays
        .iter()
        .map(|&m| OnePoleFilter::pure_gain(gamma.powi(m as i32)))
        .collect();
    let attenuated = FdnSystem::with_filters(
        delays,
        feedback,
        unit_gains(4),
        unit_gains(4),
        Complex64::ZERO,
        filters,
    )
    .unwrap();
    let (pl, _) = solve_fully(&lossless);
    let (pa, _) = solve_fully(&attenuated);
    let scaled: Vec<Complex64> = pl.poles.iter().map(|&z| z * gamma).collect();
    let matched = match_pole_sets(&pa.poles, &scaled).unwrap();
    assert!(matched.max_distance < 1e-10, "{:.3e}", matched.max_distance);
    for (i, &j) in matched.assignment.iter().enumerate() {
        let da = (pa.poles[i].arg() - scaled[j].arg()).abs();
        assert!(da.min(core::f64::consts::TAU - da) < 1e-10);
        // Every mode decays at exactly the target rate.
        let t = mode_t60(pa.poles[i], fs).unwrap();
        assert!((t - t60).abs() < 1e-6 * t60, "mode T60 {t}");
    }
}

#[test]
fn per_angle_bounds_contain_filtered_poles_and_t60_curves() {
    let spec = reference_attenuation_spec();
    let delays = vec![101usize, 143, 177, 209];
    let sys = attenuated_with(delays, random_orthogonal(4, 13), &spec);
    let bounds = magnitude_bounds(&sys).unwrap();
    assert!(matches!(bounds, MagnitudeBounds::PerAngle { .. }));
    let (poles, _) = solve_fully(&sys);
    let fs = spec.sample_rate;
    for p in &poles.poles {
        let theta = p.arg();
        let (lo, hi) = (bounds.lower_at(theta), bounds.upper_at(theta));
        let r = p.norm();
        assert!(r >= lo - 1e-10 && r <= hi + 1e-10, "|λ|={r} not in [{lo}, {hi}]");
        // The same containment stated as reverberation times.
        let t = mode_t60(*p, fs).unwrap();
        let t_min = t60_from_gamma(lo, fs);
        let t_max = t60_from_gamma(hi, fs);
        assert!(t >= t_min * (1.0 - 1e-9) && t <= t_max * (1.0 + 1e-9));
    }
}

#[test]
fn diagonal_gain_bounds_are_tight() {
    // A = g·I with equal delays: poles are exactly the m-th roots of g,
    // and both bound radii collapse onto them.
    let g = 0.8f64;
    let m = 5usize;
    let sys = FdnSystem::new(
        vec![m, m],
        ComplexMatrix::from_real(2, 2, &[g, 0.0, 0.0, g]),
        unit_gains(2),
        unit_gains(2),
        Complex64::ZERO,
    )
    .unwrap();
    let bounds = magnitude_bounds(&sys).unwrap();
    let r = g.powf(1.0 / m as f64);
    match bounds {
        MagnitudeBounds::Constant { lower, upper } => {
            assert!((lower - r).abs() < 1e-14);
            assert!((upper - r).abs() < 1e-14);
        }
        MagnitudeBounds::PerAngle { .. } => panic!("unfiltered system"),
    }
}

#[test]
fn average_delay_mode_uses_one_shared_filter() {
    let spec = AttenuationSpec {
        mode: AttenuationMode::AverageDelay(1074.0),
        ..reference_attenuation_spec()
    };
    let f1 = design_one_pole(&spec, 100);
    let f2 = design_one_pole(&spec, 2000);
    assert_eq!(f1.gain(), f2.gain());
    assert_eq!(f1.pole(), f2.pole());
    let proportional = design_one_pole(&reference_attenuation_spec(), 100);
    assert!(proportional.gain() != f1.gain());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_radii_are_ordered_and_positive(
        theta in -7.0f64..7.0,
        t60_dc in 0.5f64..4.0,
        t60_ny in 0.1f64..4.0,
    ) {
        let spec = AttenuationSpec {
            t60_dc,
            t60_nyquist: t60_ny,
            sample_rate: 48_000.0,
            mode: AttenuationMode::DelayProportional,
        };
        let delays = vec![40usize, 90, 200];
        let sys = attenuated_with(delays, random_orthogonal(3, 3), &spec);
        let bounds = magnitude_bounds(&sys).unwrap();
        let (lo, hi) = (bounds.lower_at(theta), bounds.upper_at(theta));
        prop_assert!(lo > 0.0 && lo <= hi && hi < 1.0 + 1e-12);
    }

    #[test]
    fn gamma_t60_round_trip(t60 in 0.05f64..50.0, fs in 8_000.0f64..96_000.0) {
        let gamma = gamma_from_t60(t60, fs);
        prop_assert!(gamma > 0.0 && gamma < 1.0);
        prop_assert!((t60_from_gamma(gamma, fs) - t60).abs() < 1e-9 * t60);
    }
}
