//! Ensembles, pole statistics and independent cross-checks.
//!
//! Three kinds of tools live here:
//!
//! * Random lossless FDN generation: Haar-distributed orthogonal feedback
//!   matrices from a seeded ChaCha stream, plus trial drivers that build,
//!   solve and aggregate whole ensembles deterministically.
//! * Statistics over decompositions: angular cluster numbers (how many
//!   poles fall in a mean-spacing window around a probe angle, compared
//!   against uniform-random and equidistributed controls) and residue
//!   magnitude histograms in decibels.
//! * An independent pole oracle: the FDN linearized to its delay-state
//!   matrix whose eigenvalues are computed densely, plus optimal pole-set
//!   matching to quantify agreement between two solvers.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::fdn::{FdnError, FdnSystem};
use crate::linalg::{eigenvalues_dense, ComplexMatrix, LinalgError, MAX_EIGEN_DIM};
use crate::modal::ModalDecomposition;
use crate::solver::{solve, EaiConfig, SolveError};

#[derive(Clone, Debug, PartialEq)]
pub enum AnalysisError {
    /// The requested statistic needs the per-mode drive maps.
    MissingDriveMaps,
    /// No finite nonzero magnitudes to bin.
    NoFiniteValues,
    /// The linearized state matrix exceeds the dense eigensolver cap.
    OracleTooLarge { states: usize },
    Eigen(LinalgError),
    /// Pole sets of different cardinality cannot be matched.
    SizeMismatch { left: usize, right: usize },
    /// An ensemble trial failed to converge or build.
    Trial { trial: usize, reason: TrialFailure },
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrialFailure {
    Build(FdnError),
    Solve(SolveError),
    Unconverged { poles: usize },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::MissingDriveMaps => {
                write!(f, "drive-map histogram requested without drive maps")
            }
            AnalysisError::NoFiniteValues => write!(f, "no finite magnitudes to histogram"),
            AnalysisError::OracleTooLarge { states } => {
                write!(f, "linearized order {states} exceeds oracle cap {MAX_EIGEN_DIM}")
            }
            AnalysisError::Eigen(e) => write!(f, "oracle eigensolver failed: {e}"),
            AnalysisError::SizeMismatch { left, right } => {
                write!(f, "cannot match pole sets of sizes {left} and {right}")
            }
            AnalysisError::Trial { trial, reason } => {
                write!(f, "ensemble trial {trial} failed: {reason:?}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AnalysisError {}

// ---------------------------------------------------------------------------
// Random orthogonal matrices and seeded ensembles.

/// Haar-distributed random orthogonal matrix: QR of an iid standard
/// normal matrix with the R-diagonal sign correction. Deterministic per
/// seed and platform-independent (fixed ChaCha stream).
pub fn random_orthogonal(n: usize, seed: u64) -> ComplexMatrix {
    random_orthogonal_from(n, &mut ChaCha12Rng::seed_from_u64(seed))
}

/// Same as [`random_orthogonal`] but drawing from a caller-owned stream.
pub fn random_orthogonal_from(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut g = vec![0.0f64; n * n];
    for slot in g.iter_mut() {
        *slot = rng.sample(StandardNormal);
    }
    let q = haar_qr(n, &mut g);
    ComplexMatrix::from_real(n, n, &q)
}

/// Householder QR of `g`, returning Q with columns sign-fixed so the
/// distribution is exactly Haar (Q·diag(sign(r_jj))).
fn haar_qr(n: usize, g: &mut [f64]) -> Vec<f64> {
    let mut q = vec![0.0f64; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let mut v = vec![0.0f64; n];
    for k in 0..n {
        let mut norm_sqr = 0.0;
        for i in k..n {
            norm_sqr += g[i * n + k] * g[i * n + k];
        }
        let norm = norm_sqr.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = g[k * n + k];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let mut vnorm_sqr = 0.0;
        for i in k..n {
            let vi = if i == k { g[i * n + k] - alpha } else { g[i * n + k] };
            v[i] = vi;
            vnorm_sqr += vi * vi;
        }
        if vnorm_sqr == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sqr;
        // Left-apply to the remaining columns of g.
        for j in k..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += v[i] * g[i * n + j];
            }
            dot *= tau;
            for i in k..n {
                g[i * n + j] -= dot * v[i];
            }
        }
        // Right-accumulate into q: Q ← Q · H_k.
        for row in 0..n {
            let mut dot = 0.0;
            for i in k..n {
                dot += q[row * n + i] * v[i];
            }
            dot *= tau;
            for i in k..n {
                q[row * n + i] -= dot * v[i];
            }
        }
    }
    for j in 0..n {
        if g[j * n + j] < 0.0 {
            for i in 0..n {
                q[i * n + j] = -q[i * n + j];
            }
        }
    }
    q
}

/// Stable per-trial seed derivation (splitmix64 of master + index).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random lossless FDN: delays uniform in `[delay_min, delay_max]`, Haar
/// orthogonal feedback, unit input/output gains, zero direct gain.
pub fn random_lossless_fdn(
    size: usize,
    delay_min: usize,
    delay_max: usize,
    seed: u64,
) -> Result<FdnSystem, FdnError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let delays: Vec<usize> = (0..size)
        .map(|_| rng.random_range(delay_min..=delay_max))
        .collect();
    let feedback = random_orthogonal_from(size, &mut rng);
    FdnSystem::new(
        delays,
        feedback,
        vec![Complex64::ONE; size],
        vec![Complex64::ONE; size],
        Complex64::ZERO,
    )
}

// ---------------------------------------------------------------------------
// Cluster numbers.

/// Distribution of angular cluster numbers over `[0, 1, 2, 3, ≥4]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterHistogram {
    /// `probabilities[κ]` estimates `P(N_cl = κ)`; the last bin pools
    /// `κ ≥ 4`. Sums to one.
    pub probabilities: [f64; 5],
    /// Probe angles counted per trial.
    pub probes: usize,
    /// Trials averaged into this histogram.
    pub trials: usize,
}

impl ClusterHistogram {
    /// Largest absolute difference of bin probabilities.
    pub fn max_abs_diff(&self, other: &[f64; 5]) -> f64 {
        self.probabilities
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Cluster-number reference for a Poisson point process of unit rate:
/// `[e⁻¹, e⁻¹, e⁻¹/2, e⁻¹/6, 1 − 8e⁻¹/3]`.
pub fn poisson_cluster_reference() -> [f64; 5] {
    let e1 = (-1.0f64).exp();
    [e1, e1, e1 / 2.0, e1 / 6.0, 1.0 - e1 * 8.0 / 3.0]
}

/// Counts poles in the half-open window `[ω − π/order, ω + π/order)` for
/// `probes` equispaced probe angles ω and histograms the counts.
///
/// `angles` are pole angles in radians (any branch); `order` sets the
/// window to the mean angular spacing `2π/order`. Windows are half-open
/// so a pole sitting exactly on a window edge is counted once, never
/// twice, which keeps perfectly equidistributed inputs at cluster number
/// exactly one (for power-of-two `order`, where the arithmetic is exact).
pub fn cluster_numbers(angles: &[f64], order: usize, probes: usize) -> ClusterHistogram {
    let turns: Vec<f64> = angles.iter().map(|&a| wrap_to_turn(a)).collect();
    cluster_numbers_turns(turns, order, probes)
}

/// Control histogram for exactly equidistributed angles `2πk/order`,
/// built in turn units so dyadic orders bin exactly.
pub fn equidistributed_cluster_histogram(order: usize, probes: usize) -> ClusterHistogram {
    let turns: Vec<f64> = (0..order).map(|k| k as f64 / order as f64).collect();
    cluster_numbers_turns(turns, order, probes)
}

/// Control histogram for iid uniform angles, averaged over trials.
pub fn uniform_random_cluster_histogram(
    order: usize,
    probes: usize,
    trials: usize,
    master_seed: u64,
) -> ClusterHistogram {
    let run = |t: usize| {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(master_seed, t as u64));
        let turns: Vec<f64> = (0..order).map(|_| rng.random::<f64>()).collect();
        cluster_numbers_turns(turns, order, probes)
    };
    let histograms = map_trials(trials, run);
    average_cluster_histograms(&histograms)
}

/// Mean of per-trial histograms (all with equal probe counts).
pub fn average_cluster_histograms(histograms: &[ClusterHistogram]) -> ClusterHistogram {
    assert!(!histograms.is_empty(), "need at least one histogram");
    let mut probabilities = [0.0f64; 5];
    let mut trials = 0;
    for h in histograms {
        for (acc, p) in probabilities.iter_mut().zip(&h.probabilities) {
            *acc += p;
        }
        trials += h.trials;
    }
    let inv = 1.0 / histograms.len() as f64;
    for p in probabilities.iter_mut() {
        *p *= inv;
    }
    ClusterHistogram {
        probabilities,
        probes: histograms[0].probes,
        trials,
    }
}

fn wrap_to_turn(angle: f64) -> f64 {
    let t = angle / core::f64::consts::TAU;
    let t = t - t.floor();
    // floor of a tiny negative can still round the difference up to 1.0.
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

fn cluster_numbers_turns(mut turns: Vec<f64>, order: usize, probes: usize) -> ClusterHistogram {
    assert!(order >= 1 && probes >= 1);
    turns.sort_unstable_by(f64::total_cmp);
    let half = 0.5 / order as f64;
    let mut bins = [0u64; 5];
    for l in 0..probes {
        let center = l as f64 / probes as f64;
        let count = circular_count(&turns, center - half, center + half);
        bins[count.min(4)] += 1;
    }
    let mut probabilities = [0.0f64; 5];
    for (p, &b) in probabilities.iter_mut().zip(&bins) {
        *p = b as f64 / probes as f64;
    }
    ClusterHistogram {
        probabilities,
        probes,
        trials: 1,
    }
}

/// Points in the half-open arc `[lo, hi)` on the unit circle of turns;
/// `sorted` holds values in `[0, 1)` and the arc may wrap either edge.
fn circular_count(sorted: &[f64], lo: f64, hi: f64) -> usize {
    debug_assert!(hi - lo <= 1.0);
    let span = |a: f64, b: f64| {
        sorted.partition_point(|&t| t < b) - sorted.partition_point(|&t| t < a)
    };
    if lo < 0.0 {
        span(lo + 1.0, 1.0) + span(0.0, hi)
    } else if hi > 1.0 {
        span(lo, 1.0) + span(0.0, hi - 1.0)
    } else {
        span(lo, hi)
    }
}

/// Ensemble of random lossless FDNs for cluster statistics.
#[derive(Clone, Copy, Debug)]
pub struct LosslessEnsembleSpec {
    /// Delay lines per system.
    pub size: usize,
    /// Uniform delay range, inclusive.
    pub delay_min: usize,
    pub delay_max: usize,
    pub trials: usize,
    /// Probe angles per unit of system order (probes = factor · N̂).
    pub probe_factor: usize,
    /// Sweep cap override; `None` keeps the per-order default. Random
    /// delay draws produce near-degenerate pole pairs whose linear tail
    /// can need more than the default budget, and a single unconverged
    /// pole aborts the whole ensemble.
    pub sweep_cap: Option<u32>,
}

/// Solves `trials` random lossless FDNs and averages their cluster
/// histograms. Every trial must converge; the first failure aborts.
pub fn lossless_cluster_ensemble(
    spec: &LosslessEnsembleSpec,
    master_seed: u64,
) -> Result<ClusterHistogram, AnalysisError> {
    let run = |t: usize| -> Result<ClusterHistogram, AnalysisError> {
        let trial_err = |reason| AnalysisError::Trial { trial: t, reason };
        let sys = random_lossless_fdn(
            spec.size,
            spec.delay_min,
            spec.delay_max,
            derive_seed(master_seed, t as u64),
        )
        .map_err(|e| trial_err(TrialFailure::Build(e)))?;
        let order = sys.order();
        let mut config = EaiConfig::for_order(order);
        if let Some(cap) = spec.sweep_cap {
            config.max_full_iterations = cap;
        }
        let (poles, _) = solve(&sys, &config).map_err(|e| trial_err(TrialFailure::Solve(e)))?;
        if !poles.all_converged() {
            return Err(trial_err(TrialFailure::Unconverged {
                poles: poles.unconverged_count(),
            }));
        }
        let angles: Vec<f64> = poles.poles.iter().map(|p| p.arg()).collect();
        Ok(cluster_numbers(&angles, order, spec.probe_factor * order))
    };
    let results: Result<Vec<ClusterHistogram>, AnalysisError> =
        map_trials(spec.trials, run).into_iter().collect();
    Ok(average_cluster_histograms(&results?))
}

#[cfg(feature = "rayon")]
fn map_trials<T: Send>(trials: usize, run: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(run).collect()
}

#[cfg(not(feature = "rayon"))]
fn map_trials<T>(trials: usize, run: impl Fn(usize) -> T) -> Vec<T> {
    (0..trials).map(run).collect()
}

// ---------------------------------------------------------------------------
// Residue magnitude histograms.

/// Which magnitude enters the histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidueKind {
    /// `|ρ_i|`: residues for the system's drive.
    Driven,
    /// `|1/ρ̄_i| = |p'(λ_i)|`: inverse undriven residues.
    UndrivenInverse,
    /// All `N²` drive-map entries per mode.
    DriveMap,
}

/// Fixed-width histogram over decibel magnitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct DbHistogram {
    pub bin_width_db: f64,
    /// Lower edge of `counts[0]`, an integer multiple of the width.
    pub origin_db: f64,
    pub counts: Vec<u64>,
    /// Zero magnitudes (−∞ dB) excluded from the bins.
    pub skipped_zeros: usize,
}

impl DbHistogram {
    pub fn bin_lower(&self, index: usize) -> f64 {
        self.origin_db + index as f64 * self.bin_width_db
    }

    pub fn bin_upper(&self, index: usize) -> f64 {
        self.bin_lower(index) + self.bin_width_db
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.counts[index] as f64 / self.total().max(1) as f64
    }
}

/// Extracts the requested magnitudes in dB (`20 log₁₀|x|`), skipping
/// exact zeros.
pub fn residue_magnitudes_db(
    dec: &ModalDecomposition,
    kind: ResidueKind,
    drive_maps: Option<&[ComplexMatrix]>,
) -> Result<Vec<f64>, AnalysisError> {
    let mut out = Vec::new();
    let mut push = |mag: f64| {
        if mag > 0.0 {
            out.push(20.0 * mag.log10());
        }
    };
    match kind {
        ResidueKind::Driven => {
            for m in &dec.modes {
                push(m.residue.norm());
            }
        }
        ResidueKind::UndrivenInverse => {
            for m in &dec.modes {
                let mag = m.undriven_residue.norm();
                if mag > 0.0 {
                    push(1.0 / mag);
                }
            }
        }
        ResidueKind::DriveMap => {
            let maps = drive_maps.ok_or(AnalysisError::MissingDriveMaps)?;
            for map in maps {
                for z in map.data() {
                    push(z.norm());
                }
            }
        }
    }
    Ok(out)
}

/// Bins values (dB) into a fixed-width histogram aligned to integer
/// multiples of the width.
pub fn histogram_db(values: &[f64], bin_width_db: f64) -> Result<DbHistogram, AnalysisError> {
    assert!(bin_width_db > 0.0, "bin width must be positive");
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(AnalysisError::NoFiniteValues);
    }
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let origin = (min / bin_width_db).floor() * bin_width_db;
    let nbins = (((max - origin) / bin_width_db).floor() as usize + 1).max(1);
    let mut counts = vec![0u64; nbins];
    for v in &finite {
        let idx = (((v - origin) / bin_width_db).floor() as usize).min(nbins - 1);
        counts[idx] += 1;
    }
    Ok(DbHistogram {
        bin_width_db,
        origin_db: origin,
        counts,
        skipped_zeros: values.len() - finite.len(),
    })
}

/// Convenience: extract and bin in one call.
pub fn residue_histogram(
    dec: &ModalDecomposition,
    kind: ResidueKind,
    drive_maps: Option<&[ComplexMatrix]>,
    bin_width_db: f64,
) -> Result<DbHistogram, AnalysisError> {
    let values = residue_magnitudes_db(dec, kind, drive_maps)?;
    histogram_db(&values, bin_width_db)
}

// ---------------------------------------------------------------------------
// Linearization oracle.

/// Poles via the delay-state linearization: the FDN recursion as one
/// `N̂ × N̂` (plus one state per filtered line) matrix whose eigenvalues
/// are computed densely. Independent of the Ehrlich-Aberth path end to
/// end, which makes it the reference the iteration is checked against.
///
/// Filters add one state per line whose eigenvalue contribution is an
/// exact zero (the filter state is a scaled copy of the line tap, so the
/// augmented matrix drops rank by one per line); those `N` structural
/// zeros are removed before returning. Capped at `N̂ + N ≤ 512` states.
pub fn oracle_poles(sys: &FdnSystem) -> Result<Vec<Complex64>, AnalysisError> {
    let order = sys.order();
    let n = sys.size();
    let filtered = sys.filters().is_some();
    let states = order + if filtered { n } else { 0 };
    if states > MAX_EIGEN_DIM {
        return Err(AnalysisError::OracleTooLarge { states });
    }

    let mut t = ComplexMatrix::zeros(states, states);
    let mut offset = vec![0usize; n];
    let mut acc = 0usize;
    for i in 0..n {
        offset[i] = acc;
        acc += sys.delays()[i];
    }
    // Delay chains: state (i, k) holds the sample that left line i's head
    // k+1 steps ago; the chain shifts by one each step.
    for i in 0..n {
        for k in 1..sys.delays()[i] {
            t[(offset[i] + k, offset[i] + k - 1)] = Complex64::ONE;
        }
    }
    match sys.filters() {
        None => {
            // Head of chain i reads the tails through the feedback matrix.
            for i in 0..n {
                for j in 0..n {
                    let tail_j = offset[j] + sys.delays()[j] - 1;
                    t[(offset[i], tail_j)] += sys.feedback()[(i, j)];
                }
            }
        }
        Some(filters) => {
            // Filter state F_i = α_i applied to line i's tail; heads read
            // the filter outputs g(1−p)·tail + p·F.
            for i in 0..n {
                let fi = order + i;
                let tail_i = offset[i] + sys.delays()[i] - 1;
                let direct = Complex64::new(filters[i].gain() * (1.0 - filters[i].pole()), 0.0);
                let feedback_pole = Complex64::new(filters[i].pole(), 0.0);
                t[(fi, tail_i)] = direct;
                t[(fi, fi)] = feedback_pole;
                for j in 0..n {
                    let a = sys.feedback()[(j, i)];
                    t[(offset[j], tail_i)] += a * direct;
                    t[(offset[j], fi)] += a * feedback_pole;
                }
            }
        }
    }

    let mut eigs = eigenvalues_dense(&t).map_err(AnalysisError::Eigen)?;
    if filtered {
        // Drop the N structural zeros: smallest magnitudes first.
        eigs.sort_unstable_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()));
        eigs.drain(0..n);
    }
    Ok(eigs)
}

// ---------------------------------------------------------------------------
// Pole-set matching.

/// Result of a one-to-one matching between two pole sets.
#[derive(Clone, Debug)]
pub struct PoleMatch {
    /// `assignment[i]` is the index in the second set paired with pole
    /// `i` of the first.
    pub assignment: Vec<usize>,
    pub max_distance: f64,
    pub mean_distance: f64,
}

/// Optimal (small sets) or near-optimal (large sets) one-to-one matching
/// by Euclidean distance.
///
/// Up to 512 poles the assignment is exact (Jonker-Volgenant auction on
/// the full cost matrix, minimizing the total distance). Beyond that,
/// candidates are restricted to angular neighbors and matched greedily by
/// distance, which is exact for the well-separated near-circular sets it
/// is used on.
pub fn match_pole_sets(a: &[Complex64], b: &[Complex64]) -> Result<PoleMatch, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(PoleMatch {
            assignment: Vec::new(),
            max_distance: 0.0,
            mean_distance: 0.0,
        });
    }
    let assignment = if a.len() <= 512 {
        hungarian_assignment(a, b)
    } else {
        greedy_angular_assignment(a, b)
    };
    let mut max_distance = 0.0f64;
    let mut sum = 0.0f64;
    for (i, &j) in assignment.iter().enumerate() {
        let d = (a[i] - b[j]).norm();
        max_distance = max_distance.max(d);
        sum += d;
    }
    Ok(PoleMatch {
        mean_distance: sum / a.len() as f64,
        max_distance,
        assignment,
    })
}

/// Jonker-Volgenant shortest-augmenting-path assignment minimizing total
/// `|a_i − b_j|`.
fn hungarian_assignment(a: &[Complex64], b: &[Complex64]) -> Vec<usize> {
    let n = a.len();
    let mut cost = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = (a[i] - b[j]).norm();
        }
    }
    // 1-based arrays in the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Greedy matching restricted to angular neighbors, with a brute-force
/// pass for any leftovers.
fn greedy_angular_assignment(a: &[Complex64], b: &[Complex64]) -> Vec<usize> {
    const NEIGHBORS: usize = 8;
    let n = a.len();
    let mut b_order: Vec<u32> = (0..n as u32).collect();
    let b_angles: Vec<f64> = b.iter().map(|z| z.arg()).collect();
    b_order.sort_unstable_by(|&x, &y| {
        b_angles[x as usize]
            .total_cmp(&b_angles[y as usize])
            .then(x.cmp(&y))
    });
    let sorted_angles: Vec<f64> = b_order.iter().map(|&i| b_angles[i as usize]).collect();

    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(n * 2 * NEIGHBORS);
    for (i, &ai) in a.iter().enumerate() {
        let theta = ai.arg();
        let pos = sorted_angles.partition_point(|&t| t < theta);
        for delta in 0..2 * NEIGHBORS {
            let j = b_order[(pos + n + delta - NEIGHBORS) % n] as usize;
            candidates.push(((ai - b[j]).norm(), i as u32, j as u32));
        }
    }
    candidates.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut assignment = vec![usize::MAX; n];
    let mut b_used = vec![false; n];
    let mut assigned = 0usize;
    for &(_, i, j) in &candidates {
        let (i, j) = (i as usize, j as usize);
        if assignment[i] == usize::MAX && !b_used[j] {
            assignment[i] = j;
            b_used[j] = true;
            assigned += 1;
            if assigned == n {
                break;
            }
        }
    }
    if assigned < n {
        let free_b: Vec<usize> = (0..n).filter(|&j| !b_used[j]).collect();
        for i in 0..n {
            if assignment[i] != usize::MAX {
                continue;
            }
            let mut best = (f64::INFINITY, usize::MAX);
            for &j in &free_b {
                if b_used[j] {
                    continue;
                }
                let d = (a[i] - b[j]).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
            assignment[i] = best.1;
            b_used[best.1] = true;
        }
    }
    assignment
}
