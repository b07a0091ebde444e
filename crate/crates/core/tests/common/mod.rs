//! Shared builders and independent oracles for the integration tests.
//!
//! Everything here recomputes results through a route the library does
//! not use: cofactor expansions instead of LU/SVD, least-squares fits
//! instead of adjugate residues, direct summation instead of closed
//! forms. Agreement between the two routes is the evidence.

#![allow(dead_code)]

use fdn_modal_core::analysis::derive_seed;
use fdn_modal_core::attenuation::{design_one_pole, AttenuationMode, AttenuationSpec};
use fdn_modal_core::fdn::FdnSystem;
use fdn_modal_core::linalg::{lu_factor, ComplexMatrix};
use fdn_modal_core::modal::ModalDecomposition;
use fdn_modal_core::solver::{solve, EaiConfig, EaiStats, PoleSet};
use fdn_modal_core::Complex64;

// ---------------------------------------------------------------------------
// Cofactor-expansion oracles (exponential cost; n ≤ 9).

pub fn cofactor_det(m: &ComplexMatrix) -> Complex64 {
    let n = m.rows();
    assert!(m.is_square() && n <= 9, "cofactor oracle is exponential");
    if n == 0 {
        return Complex64::ONE;
    }
    let idx: Vec<usize> = (0..n).collect();
    det_rec(m, &idx, &idx)
}

fn det_rec(m: &ComplexMatrix, rows: &[usize], cols: &[usize]) -> Complex64 {
    if rows.len() == 1 {
        return m[(rows[0], cols[0])];
    }
    let mut acc = Complex64::ZERO;
    let sub_rows = &rows[1..];
    for (k, &c) in cols.iter().enumerate() {
        let entry = m[(rows[0], c)];
        if entry == Complex64::ZERO {
            continue;
        }
        let sub_cols: Vec<usize> =
            cols.iter().copied().filter(|&x| x != c).collect();
        let minor = det_rec(m, sub_rows, &sub_cols);
        let term = entry * minor;
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    acc
}

/// Adjugate via first principles: `adj(M)[j][i] = (−1)^{i+j}·minor_ij`.
pub fn cofactor_adjugate(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    assert!(m.is_square() && n <= 9);
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    if n == 1 {
        return ComplexMatrix::identity(1);
    }
    let mut adj = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let rows: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let minor = det_rec(m, &rows, &cols);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            adj[(j, i)] = minor * sign;
        }
    }
    adj
}

// ---------------------------------------------------------------------------
// Least-squares residue oracle.

/// Fits residues to the recursion's impulse response by least squares:
/// minimizes `Σ_{n=1}^{L−1} |h(n) − Σ_i ρ_i λ_i^{n−1}|²` through the
/// normal equations, with Gram entries summed as geometric series.
/// Assumes the poles themselves are accurate; independent of the
/// adjugate-based residue path.
pub fn least_squares_residues(
    sys: &FdnSystem,
    poles: &[Complex64],
    window: usize,
) -> Vec<Complex64> {
    let n = poles.len();
    let h = sys.impulse_response(window);
    let terms = window - 1;
    let mut gram = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            gram[(i, k)] = geometric_sum(poles[i].conj() * poles[k], terms);
        }
    }
    // rhs_i = Σ_{n≥1} conj(λ_i)^{n−1} h(n).
    let mut rhs = vec![Complex64::ZERO; n];
    for (i, &p) in poles.iter().enumerate() {
        let pc = p.conj();
        let mut w = Complex64::ONE;
        let mut acc = Complex64::ZERO;
        for sample in h.iter().take(window).skip(1) {
            acc += w * sample;
            w *= pc;
        }
        rhs[i] = acc;
    }
    let factors = lu_factor(&gram);
    assert!(!factors.is_singular(), "ill-posed least-squares fit");
    factors.solve(&rhs).expect("solvable normal equations")
}

/// `Σ_{n=0}^{terms−1} r^n`, stable for `r` arbitrarily close to 1.
fn geometric_sum(r: Complex64, terms: usize) -> Complex64 {
    if (r - Complex64::ONE).norm() < 1e-7 {
        // Near-confluent ratio: sum directly, the closed form cancels.
        let mut acc = Complex64::ZERO;
        let mut w = Complex64::ONE;
        for _ in 0..terms {
            acc += w;
            w *= r;
        }
        acc
    } else {
        (r.powu(terms as u32) - Complex64::ONE) / (r - Complex64::ONE)
    }
}

/// `H(z)` evaluated from the decomposition: `d + Σ ρ_i/(z − λ_i)`.
pub fn rational_eval(dec: &ModalDecomposition, z: Complex64) -> Complex64 {
    let mut acc = dec.direct_gain;
    for m in &dec.modes {
        acc += m.residue / (z - m.pole);
    }
    acc
}

/// Compensated (Kahan) complex summation for oracle-side sums whose
/// naive rounding would exceed the tolerance under test.
pub fn kahan_sum(terms: impl Iterator<Item = Complex64>) -> Complex64 {
    let (mut sr, mut si) = (0.0f64, 0.0f64);
    let (mut cr, mut ci) = (0.0f64, 0.0f64);
    for t in terms {
        let yr = t.re - cr;
        let tr = sr + yr;
        cr = (tr - sr) - yr;
        sr = tr;
        let yi = t.im - ci;
        let ti = si + yi;
        ci = (ti - si) - yi;
        si = ti;
    }
    Complex64::new(sr, si)
}

// ---------------------------------------------------------------------------
// Reference configurations from the validation studies.

/// Delay set of the attenuated 8-line reference configuration.
pub fn reference_delays_attenuated() -> Vec<usize> {
    vec![2300, 499, 1255, 866, 729, 964, 1363, 1491]
}

/// Delay set of the residue-histogram reference configuration.
pub fn reference_delays_histogram() -> Vec<usize> {
    vec![492, 794, 1849, 1855, 1155, 1090, 78, 1957]
}

/// Two-second DC / 0.4-second Nyquist target at 48 kHz.
pub fn reference_attenuation_spec() -> AttenuationSpec {
    AttenuationSpec {
        t60_dc: 2.0,
        t60_nyquist: 0.4,
        sample_rate: 48_000.0,
        mode: AttenuationMode::DelayProportional,
    }
}

// ---------------------------------------------------------------------------
// System builders.

pub fn unit_gains(n: usize) -> Vec<Complex64> {
    vec![Complex64::ONE; n]
}

/// Lossless FDN with the given feedback matrix and unit gains.
pub fn lossless_with(delays: Vec<usize>, feedback: ComplexMatrix) -> FdnSystem {
    let n = delays.len();
    FdnSystem::new(delays, feedback, unit_gains(n), unit_gains(n), Complex64::ZERO)
        .expect("valid system")
}

/// Same structure with per-line one-pole absorption filters.
pub fn attenuated_with(
    delays: Vec<usize>,
    feedback: ComplexMatrix,
    spec: &AttenuationSpec,
) -> FdnSystem {
    let n = delays.len();
    let filters = delays.iter().map(|&m| design_one_pole(spec, m)).collect();
    FdnSystem::with_filters(
        delays,
        feedback,
        unit_gains(n),
        unit_gains(n),
        Complex64::ZERO,
        filters,
    )
    .expect("valid filtered system")
}

/// Random delays in `[lo, hi]`, resampled until the total is at most
/// `max_order` (deterministic retry seeds).
pub fn random_delays_capped(
    n: usize,
    lo: usize,
    hi: usize,
    max_order: usize,
    seed: u64,
) -> Vec<usize> {
    use rand::{Rng, SeedableRng};
    for attempt in 0..64 {
        let mut rng =
            rand_chacha::ChaCha12Rng::seed_from_u64(derive_seed(seed, attempt));
        let delays: Vec<usize> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
        if delays.iter().sum::<usize>() <= max_order {
            return delays;
        }
    }
    panic!("no delay draw within the order cap");
}

/// Random delays for `n` lines whose total lands close to `target`
/// (proportional rescaling of a uniform draw; every line ≥ 1).
pub fn random_delays_with_total(n: usize, target: usize, seed: u64) -> Vec<usize> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let raw_sum: f64 = raw.iter().sum();
    raw.iter()
        .map(|r| (((r / raw_sum) * target as f64).round() as usize).max(1))
        .collect()
}

/// Solve with the published tolerances but enough sweep headroom for the
/// slow tail that near-degenerate pole pairs produce on large systems.
pub fn solve_fully(sys: &FdnSystem) -> (PoleSet, EaiStats) {
    let config = EaiConfig {
        max_full_iterations: 100,
        ..EaiConfig::for_order(sys.order())
    };
    let (poles, stats) = solve(sys, &config).expect("solver runs");
    assert!(
        poles.all_converged(),
        "unconverged poles: {}",
        poles.unconverged_count()
    );
    (poles, stats)
}
