//! Ehrlich-Aberth iteration (EAI) on the loop matrix.
//!
//! The poles of an FDN are the roots of `p(z) = det P(z)`. EAI updates all
//! `N̂` root estimates simultaneously:
//!
//! ```text
//! λ_j ← λ_j − 1 / (W(λ_j)^{-1} − D_j),    D_j = Σ_{l≠j} 1/(λ_j − λ_l)
//! ```
//!
//! where `W = p/p'` is the Newton correction and `D_j` deflates the other
//! current estimates. Jacobi's formula gives `W(z)^{-1} = tr(P(z)^{-1} P'(z))`
//! directly from an `N × N` factorization, so no polynomial coefficients
//! are ever formed and the per-sweep cost is `O(N̂ · N³)` plus deflation.
//!
//! Exact deflation costs `O(N̂²)` per sweep and dominates for large
//! systems. Because FDN poles distribute nearly uniformly in angle, the
//! deflation sum splits into the `n_near` angularly nearest estimates,
//! summed exactly, plus a far part with the closed form
//! `(N̂ − n_near − 1) / (2λ_j)`: for poles on a circle the far terms pair
//! up across `λ_j` via `1/(1−e^{ix}) + 1/(1−e^{−ix}) = 1`, contributing
//! `1/(2λ_j)` each. The approximation is only trusted when the a-priori
//! gate
//!
//! ```text
//! |W^{-1} − D̃_j| − ε_D ≥ 2/τ₃
//! ```
//!
//! holds, where `ε_D` bounds `|D_j − D̃_j|`; then the approximate and exact
//! steps differ by at most `τ₃/2 · |step|²`-order terms and, for steps
//! bounded by the containment annulus, by no more than `τ₃` absolutely.
//! Otherwise the sweep falls back to the exact sum for that pole.
//!
//! Two stopping criteria run per pole: the loop matrix turning numerically
//! singular (`rcond < τ₁`, checked before stepping, so exact initial
//! guesses converge with zero iterations) and the relative step size
//! (`|step| ≤ τ₂ |λ_j|`). Iterates are clipped radially to the containment
//! annulus of [`magnitude_bounds`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::attenuation::{magnitude_bounds, MagnitudeBounds};
use crate::fdn::{EvalError, FdnSystem};
use crate::linalg::{lu_factor, LinalgError, LuFactors};

pub const DEFAULT_TOL_RCOND: f64 = 1e-12;
pub const DEFAULT_TOL_STEP: f64 = 1e-14;
pub const DEFAULT_TOL_AD: f64 = 1e-3;
pub const DEFAULT_DEFLATION_ERR_BOUND: f64 = 1e3;
pub const DEFAULT_MAX_FULL_ITERATIONS: u32 = 30;

/// Update ordering within a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// All steps computed from the sweep-start snapshot. Deterministic
    /// regardless of parallelism; the default.
    Jacobi,
    /// Steps see updates made earlier in the same sweep; serial only.
    GaussSeidel,
}

/// How the deflation sum is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeflationStrategy {
    /// Always the full `O(N̂)` sum.
    Exact,
    /// Near/far split with the gate above; falls back to exact per pole
    /// and per sweep when the gate fails.
    Approximate,
}

/// Which stopping criterion ended a pole's iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Loop matrix numerically singular at the estimate: `rcond < τ₁`.
    Rcond,
    /// Relative step below `τ₂`.
    SmallStep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoleStatus {
    /// Still iterating.
    Running,
    /// Last step left the containment annulus and was clipped back; still
    /// iterating.
    Clipped,
    Converged(StopReason),
    /// Still unconverged when the sweep budget ran out.
    MaxIter,
}

impl PoleStatus {
    pub fn is_converged(&self) -> bool {
        matches!(self, PoleStatus::Converged(_))
    }

    /// Stable lowercase label, used in CSV output and log lines.
    pub fn label(&self) -> &'static str {
        match self {
            PoleStatus::Running => "running",
            PoleStatus::Clipped => "clipped",
            PoleStatus::Converged(StopReason::Rcond) => "converged_rcond",
            PoleStatus::Converged(StopReason::SmallStep) => "converged_step",
            PoleStatus::MaxIter => "max_iter",
        }
    }
}

/// Solver configuration. `for_order` fills in the defaults, including the
/// order-dependent near count `max(2, N̂/100 rounded to even)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EaiConfig {
    /// τ₁: reciprocal condition threshold for the singularity stop.
    pub tol_rcond: f64,
    /// τ₂: relative step-size stop.
    pub tol_step: f64,
    /// τ₃: absolute step-error budget the deflation gate protects.
    pub tol_ad: f64,
    /// Number of angular neighbors summed exactly; even.
    pub near_count: usize,
    /// ε_D: a-priori bound on `|D − D̃|` used by the gate.
    pub deflation_err_bound: f64,
    pub max_full_iterations: u32,
    pub scheme: Scheme,
    pub deflation: DeflationStrategy,
}

impl EaiConfig {
    pub fn for_order(order: usize) -> Self {
        EaiConfig {
            tol_rcond: DEFAULT_TOL_RCOND,
            tol_step: DEFAULT_TOL_STEP,
            tol_ad: DEFAULT_TOL_AD,
            near_count: default_near_count(order),
            deflation_err_bound: DEFAULT_DEFLATION_ERR_BOUND,
            max_full_iterations: DEFAULT_MAX_FULL_ITERATIONS,
            scheme: Scheme::Jacobi,
            deflation: DeflationStrategy::Approximate,
        }
    }

    pub fn validate(&self, order: usize) -> Result<(), SolveError> {
        let bad = |reason| Err(SolveError::InvalidConfig { reason });
        if !(self.tol_rcond > 0.0 && self.tol_rcond < 1.0) {
            return bad("tol_rcond must lie in (0, 1)");
        }
        if !(self.tol_step > 0.0 && self.tol_step < 1.0) {
            return bad("tol_step must lie in (0, 1)");
        }
        if !(self.tol_ad > 0.0) {
            return bad("tol_ad must be positive");
        }
        if !(self.deflation_err_bound >= 0.0) {
            return bad("deflation_err_bound must be nonnegative");
        }
        if self.max_full_iterations == 0 {
            return bad("max_full_iterations must be at least 1");
        }
        if self.near_count % 2 != 0 {
            return bad("near_count must be even");
        }
        if self.near_count >= order {
            return bad("near_count must be smaller than the system order");
        }
        Ok(())
    }
}

/// Default `n_near`: `N̂/100` rounded to the nearest even integer, at
/// least 2, and strictly smaller than `N̂`.
pub fn default_near_count(order: usize) -> usize {
    let nearest_even = (2.0 * (order as f64 / 200.0).round()) as usize;
    let n = nearest_even.max(2);
    if n >= order {
        if order <= 1 {
            0
        } else {
            (order - 1) & !1usize
        }
    } else {
        n
    }
}

/// Final pole estimates, index-aligned with their initial angles
/// `2πj/N̂`.
#[derive(Clone, Debug)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
    pub status: Vec<PoleStatus>,
    /// Steps actually taken per pole (prechecked convergence costs none).
    pub iterations: Vec<u32>,
}

impl PoleSet {
    pub fn order(&self) -> usize {
        self.poles.len()
    }

    pub fn all_converged(&self) -> bool {
        self.status.iter().all(|s| s.is_converged())
    }

    pub fn unconverged_count(&self) -> usize {
        self.status.iter().filter(|s| !s.is_converged()).count()
    }
}

/// Aggregate counters for one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EaiStats {
    /// Sweeps in which at least one pole actually stepped.
    pub full_iterations: u32,
    /// Mean of per-pole step counts.
    pub average_iterations: f64,
    pub total_steps: u64,
    pub exact_deflation_steps: u64,
    /// `exact_deflation_steps / total_steps`, zero for an empty run.
    pub exact_deflation_fraction: f64,
    /// Wall-clock seconds; `None` without the `std` feature.
    pub wall_time_seconds: Option<f64>,
}

/// One record per computed step, for calibration and audits.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub sweep: u32,
    pub pole_index: usize,
    /// Estimate the step was computed at.
    pub pole: Complex64,
    /// `W^{-1} = tr(P^{-1} P')`.
    pub newton_inverse: Complex64,
    /// Gated near/far estimate `D̃`; `None` under exact-only deflation
    /// unless auditing.
    pub deflation_approx: Option<Complex64>,
    /// Full sum `D`; present when it was computed (exact strategy, gate
    /// fallback, or audit).
    pub deflation_exact: Option<Complex64>,
    /// `|W^{-1} − D̃| − ε_D − 2/τ₃`; the gate passes at `≥ 0`.
    pub gate_margin: Option<f64>,
    /// Whether the applied step used the exact sum.
    pub used_exact: bool,
    pub step: Complex64,
    pub new_pole: Complex64,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveError {
    InvalidConfig { reason: &'static str },
    /// Singular-value computation for the magnitude bounds failed; not
    /// reachable for finite inputs.
    Bounds(LinalgError),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::InvalidConfig { reason } => write!(f, "invalid solver config: {reason}"),
            SolveError::Bounds(e) => write!(f, "magnitude bounds failed: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for SolveError {}

/// Errors from the single-step entry points.
#[derive(Clone, Debug, PartialEq)]
pub enum StepError {
    /// The estimate is a root to working precision; no step exists.
    AtRoot { pole: Complex64 },
    Eval(EvalError),
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::AtRoot { pole } => write!(f, "loop matrix singular at {pole}"),
            StepError::Eval(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StepError {}

impl From<EvalError> for StepError {
    fn from(e: EvalError) -> Self {
        StepError::Eval(e)
    }
}

/// Initial estimates: angle `2πj/N̂`, radius centered in the containment
/// annulus at that angle. For a lossless system the annulus collapses to
/// the unit circle and these are the `N̂`-th roots of unity.
pub fn initial_estimates(order: usize, bounds: &MagnitudeBounds) -> Vec<Complex64> {
    let step = core::f64::consts::TAU / order as f64;
    (0..order)
        .map(|j| {
            let theta = step * j as f64;
            let (lo, hi) = bounds.radii_at(theta);
            Complex64::from_polar(0.5 * (lo + hi), theta)
        })
        .collect()
}

/// Newton correction `W(z) = p(z)/p'(z)` via `1 / tr(P^{-1} P')`.
pub fn newton_term(sys: &FdnSystem, z: Complex64) -> Result<Complex64, StepError> {
    let eval = sys.eval_loop(z)?;
    let factors = lu_factor(&eval.value);
    if factors.is_singular() {
        return Err(StepError::AtRoot { pole: z });
    }
    let w_inv = trace_inv_times_derivative(&factors, &eval.derivative_diag)
        .ok_or(StepError::AtRoot { pole: z })?;
    Ok(w_inv.inv())
}

/// Full deflation sum `Σ_{l≠j} 1/(λ_j − λ_l)`. A collision within f64
/// range produces a non-finite value the solver turns into a perturbed
/// retry.
pub fn deflation_exact(poles: &[Complex64], j: usize) -> Complex64 {
    let lam = poles[j];
    let (mut sr, mut si) = (0.0f64, 0.0f64);
    for (l, p) in poles.iter().enumerate() {
        if l == j {
            continue;
        }
        let dr = lam.re - p.re;
        let di = lam.im - p.im;
        let inv = 1.0 / (dr * dr + di * di);
        sr += dr * inv;
        si -= di * inv;
    }
    Complex64::new(sr, si)
}

/// Closed-form far deflation: `(N̂ − n_near − 1) / (2 λ)`.
pub fn deflation_far_estimate(lambda: Complex64, order: usize, near_count: usize) -> Complex64 {
    let far_poles = order.saturating_sub(near_count + 1) as f64;
    lambda.inv() * (0.5 * far_poles)
}

/// One EAI update for pole `j` against the current estimate set, using
/// the configured deflation (building the angular ring on the fly when
/// approximate). Returns the new estimate and whether the step used the
/// exact deflation sum. No clipping and no convergence bookkeeping: this
/// is the inner update, exposed for inspection; [`solve`] adds both.
pub fn eai_step(
    sys: &FdnSystem,
    poles: &[Complex64],
    j: usize,
    config: &EaiConfig,
) -> Result<(Complex64, bool), StepError> {
    let eval = sys.eval_loop(poles[j])?;
    let factors = lu_factor(&eval.value);
    if factors.is_singular() {
        return Err(StepError::AtRoot { pole: poles[j] });
    }
    let w_inv = trace_inv_times_derivative(&factors, &eval.derivative_diag)
        .ok_or(StepError::AtRoot { pole: poles[j] })?;
    let (d, used_exact) = match config.deflation {
        DeflationStrategy::Exact => (deflation_exact(poles, j), true),
        DeflationStrategy::Approximate => {
            let ring = AngularRing::new(poles);
            let near = near_deflation(poles, &ring, j, config.near_count);
            let approx = near + deflation_far_estimate(poles[j], poles.len(), config.near_count);
            if gate_margin(w_inv, approx, config) >= 0.0 {
                (approx, false)
            } else {
                (deflation_exact(poles, j), true)
            }
        }
    };
    let step = (w_inv - d).inv();
    Ok((poles[j] - step, used_exact))
}

/// Runs the iteration to convergence or the sweep budget.
pub fn solve(sys: &FdnSystem, config: &EaiConfig) -> Result<(PoleSet, EaiStats), SolveError> {
    solve_impl(sys, config, false, &mut None::<&mut dyn FnMut(&StepRecord)>)
}

/// [`solve`] with a per-step observer. With `audit_deflation` set, both
/// deflation variants are computed for every approximate-mode step so the
/// observer sees `deflation_approx` and `deflation_exact` side by side
/// (used to calibrate `ε_D` and to audit the gate); the applied step is
/// unchanged.
pub fn solve_observed(
    sys: &FdnSystem,
    config: &EaiConfig,
    audit_deflation: bool,
    observer: &mut dyn FnMut(&StepRecord),
) -> Result<(PoleSet, EaiStats), SolveError> {
    solve_impl(sys, config, audit_deflation, &mut Some(observer))
}

fn solve_impl(
    sys: &FdnSystem,
    config: &EaiConfig,
    audit_deflation: bool,
    observer: &mut Option<&mut dyn FnMut(&StepRecord)>,
) -> Result<(PoleSet, EaiStats), SolveError> {
    let order = sys.order();
    config.validate(order)?;
    let bounds = magnitude_bounds(sys).map_err(SolveError::Bounds)?;

    #[cfg(feature = "std")]
    let start = std::time::Instant::now();

    let mut poles = initial_estimates(order, &bounds);
    let mut status = vec![PoleStatus::Running; order];
    let mut iterations = vec![0u32; order];
    let mut full_iterations = 0u32;
    let mut total_steps = 0u64;
    let mut exact_steps = 0u64;

    let mut next = poles.clone();
    let mut ring = AngularRing::default();

    for sweep in 0..config.max_full_iterations {
        if status.iter().all(PoleStatus::is_converged) {
            break;
        }
        let use_ring = config.deflation == DeflationStrategy::Approximate && sweep > 0;
        if use_ring {
            ring.rebuild(&poles);
        }
        // Sweep 0 deflates with the far closed form over everything: the
        // estimates still sit on the initial ring, where it is exact.
        let near_count = if sweep == 0 { 0 } else { config.near_count };
        let mut stepped_any = false;

        let gauss_seidel = config.scheme == Scheme::GaussSeidel;
        if gauss_seidel {
            for j in 0..order {
                if status[j].is_converged() {
                    continue;
                }
                let outcome = pole_step(
                    sys, config, &bounds, &poles, &ring, use_ring, near_count, j, sweep,
                    audit_deflation, observer,
                );
                apply_outcome(
                    outcome,
                    j,
                    &mut poles,
                    &mut status,
                    &mut iterations,
                    &mut stepped_any,
                    &mut total_steps,
                    &mut exact_steps,
                );
            }
        } else {
            next.copy_from_slice(&poles);
            let outcomes = jacobi_sweep(
                sys, config, &bounds, &poles, &ring, use_ring, near_count, sweep, &status,
                audit_deflation, observer,
            );
            for (j, outcome) in outcomes {
                apply_outcome(
                    outcome,
                    j,
                    &mut next,
                    &mut status,
                    &mut iterations,
                    &mut stepped_any,
                    &mut total_steps,
                    &mut exact_steps,
                );
            }
            core::mem::swap(&mut poles, &mut next);
        }

        if stepped_any {
            full_iterations += 1;
        }
    }

    for s in status.iter_mut() {
        if !s.is_converged() {
            *s = PoleStatus::MaxIter;
        }
    }

    let average_iterations = if order == 0 {
        0.0
    } else {
        iterations.iter().map(|&k| k as f64).sum::<f64>() / order as f64
    };
    let stats = EaiStats {
        full_iterations,
        average_iterations,
        total_steps,
        exact_deflation_steps: exact_steps,
        exact_deflation_fraction: if total_steps == 0 {
            0.0
        } else {
            exact_steps as f64 / total_steps as f64
        },
        #[cfg(feature = "std")]
        wall_time_seconds: Some(start.elapsed().as_secs_f64()),
        #[cfg(not(feature = "std"))]
        wall_time_seconds: None,
    };
    Ok((
        PoleSet {
            poles,
            status,
            iterations,
        },
        stats,
    ))
}

/// Result of working on one pole within a sweep.
enum StepOutcome {
    /// Converged before stepping (singular loop matrix).
    PrecheckConverged,
    /// A step was computed and applied.
    Stepped {
        new_pole: Complex64,
        status: PoleStatus,
        used_exact: bool,
    },
    /// The step could not be computed; the pole was nudged and stays
    /// running. Counts as an iteration but not as a deflation step.
    Retry { new_pole: Complex64 },
}

#[allow(clippy::too_many_arguments)]
fn jacobi_sweep(
    sys: &FdnSystem,
    config: &EaiConfig,
    bounds: &MagnitudeBounds,
    poles: &[Complex64],
    ring: &AngularRing,
    use_ring: bool,
    near_count: usize,
    sweep: u32,
    status: &[PoleStatus],
    audit_deflation: bool,
    observer: &mut Option<&mut dyn FnMut(&StepRecord)>,
) -> Vec<(usize, StepOutcome)> {
    #[cfg(feature = "rayon")]
    {
        if observer.is_none() {
            use rayon::prelude::*;
            return (0..poles.len())
                .into_par_iter()
                .filter(|&j| !status[j].is_converged())
                .map(|j| {
                    let mut no_obs: Option<&mut dyn FnMut(&StepRecord)> = None;
                    (
                        j,
                        pole_step(
                            sys, config, bounds, poles, ring, use_ring, near_count, j, sweep,
                            audit_deflation, &mut no_obs,
                        ),
                    )
                })
                .collect();
        }
    }
    (0..poles.len())
        .filter(|&j| !status[j].is_converged())
        .map(|j| {
            (
                j,
                pole_step(
                    sys, config, bounds, poles, ring, use_ring, near_count, j, sweep,
                    audit_deflation, observer,
                ),
            )
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn apply_outcome(
    outcome: StepOutcome,
    j: usize,
    poles: &mut [Complex64],
    status: &mut [PoleStatus],
    iterations: &mut [u32],
    stepped_any: &mut bool,
    total_steps: &mut u64,
    exact_steps: &mut u64,
) {
    match outcome {
        StepOutcome::PrecheckConverged => {
            status[j] = PoleStatus::Converged(StopReason::Rcond);
        }
        StepOutcome::Stepped {
            new_pole,
            status: st,
            used_exact,
        } => {
            poles[j] = new_pole;
            status[j] = st;
            iterations[j] += 1;
            *stepped_any = true;
            *total_steps += 1;
            if used_exact {
                *exact_steps += 1;
            }
        }
        StepOutcome::Retry { new_pole } => {
            poles[j] = new_pole;
            status[j] = PoleStatus::Running;
            iterations[j] += 1;
            *stepped_any = true;
        }
    }
}

/// Computes one pole's update: precheck, Newton term, gated deflation,
/// step limit, radial clip.
#[allow(clippy::too_many_arguments)]
fn pole_step(
    sys: &FdnSystem,
    config: &EaiConfig,
    bounds: &MagnitudeBounds,
    poles: &[Complex64],
    ring: &AngularRing,
    use_ring: bool,
    near_count: usize,
    j: usize,
    sweep: u32,
    audit_deflation: bool,
    observer: &mut Option<&mut dyn FnMut(&StepRecord)>,
) -> StepOutcome {
    let mut lam = poles[j];
    // A deflation collision retries in place with a slightly moved
    // estimate; bounded attempts keep the sweep total.
    for attempt in 0..3u32 {
        let eval = match sys.eval_loop(lam) {
            Ok(e) => e,
            Err(EvalError::OutsideAnnulus { .. }) => {
                return StepOutcome::Retry {
                    new_pole: pull_into_annulus(sys, bounds, lam),
                };
            }
            Err(EvalError::AtPole { .. }) => unreachable!("eval_loop does not factor"),
        };
        let factors = lu_factor(&eval.value);
        if factors.rcond_estimate() < config.tol_rcond {
            return StepOutcome::PrecheckConverged;
        }
        let Some(w_inv) = trace_inv_times_derivative(&factors, &eval.derivative_diag) else {
            // Factorization succeeded but a solve blew up; treat like a
            // singular loop matrix.
            return StepOutcome::PrecheckConverged;
        };

        let mut deflation_approx = None;
        let mut deflation_exact_val = None;
        let mut gate = None;
        let (d, used_exact) = match config.deflation {
            DeflationStrategy::Exact => {
                let d = deflation_exact_at(poles, j, lam);
                deflation_exact_val = Some(d);
                if audit_deflation {
                    let approx = approx_deflation(poles, ring, use_ring, j, lam, near_count);
                    gate = Some(gate_margin(w_inv, approx, config));
                    deflation_approx = Some(approx);
                }
                (d, true)
            }
            DeflationStrategy::Approximate => {
                let approx = approx_deflation(poles, ring, use_ring, j, lam, near_count);
                let margin = gate_margin(w_inv, approx, config);
                deflation_approx = Some(approx);
                gate = Some(margin);
                if audit_deflation {
                    deflation_exact_val = Some(deflation_exact_at(poles, j, lam));
                }
                // The first Jacobi sweep steps against the untouched
                // initial ring, where the far closed form already is the
                // exact sum; the gate would only reject its own zero-error
                // estimate. Gauss-Seidel moves estimates mid-sweep, so it
                // keeps the gate from the start.
                let ring_exact = sweep == 0 && config.scheme == Scheme::Jacobi;
                if ring_exact || margin >= 0.0 {
                    (approx, false)
                } else {
                    let d = *deflation_exact_val
                        .get_or_insert_with(|| deflation_exact_at(poles, j, lam));
                    (d, true)
                }
            }
        };

        if !is_finite_c(d) {
            // Collision with another estimate: nudge and recompute.
            lam = perturb(lam, j, sweep, attempt, 1e-10);
            continue;
        }

        let step = (w_inv - d).inv();
        if !is_finite_c(step) {
            return StepOutcome::Retry {
                new_pole: perturb(lam, j, sweep, attempt, 1e-8),
            };
        }

        let converged = step.norm() <= config.tol_step * lam.norm();
        let mut new_pole = lam - step;
        let mut clipped = false;
        if !converged {
            (new_pole, clipped) = clip_to_bounds(bounds, new_pole, lam);
        }
        if let Some(obs) = observer.as_mut() {
            obs(&StepRecord {
                sweep,
                pole_index: j,
                pole: lam,
                newton_inverse: w_inv,
                deflation_approx,
                deflation_exact: deflation_exact_val,
                gate_margin: gate,
                used_exact,
                step,
                new_pole,
                clipped,
            });
        }
        let status = if converged {
            PoleStatus::Converged(StopReason::SmallStep)
        } else if clipped {
            PoleStatus::Clipped
        } else {
            PoleStatus::Running
        };
        return StepOutcome::Stepped {
            new_pole,
            status,
            used_exact,
        };
    }
    StepOutcome::Retry {
        new_pole: perturb(lam, j, sweep, 3, 1e-8),
    }
}

/// `tr(P^{-1} P')` from an existing factorization; `None` if the solves
/// degenerate.
fn trace_inv_times_derivative(
    factors: &LuFactors,
    derivative_diag: &[Complex64],
) -> Option<Complex64> {
    let n = derivative_diag.len();
    let mut col = vec![Complex64::ZERO; n];
    let mut trace = Complex64::ZERO;
    for i in 0..n {
        col.fill(Complex64::ZERO);
        col[i] = Complex64::ONE;
        factors.solve_in_place(&mut col).ok()?;
        trace += col[i] * derivative_diag[i];
    }
    is_finite_c(trace).then_some(trace)
}

/// Exact deflation sum evaluated at `lam` standing in for `poles[j]`
/// (they differ during collision retries).
fn deflation_exact_at(poles: &[Complex64], j: usize, lam: Complex64) -> Complex64 {
    let (mut sr, mut si) = (0.0f64, 0.0f64);
    for (l, p) in poles.iter().enumerate() {
        if l == j {
            continue;
        }
        let dr = lam.re - p.re;
        let di = lam.im - p.im;
        let inv = 1.0 / (dr * dr + di * di);
        sr += dr * inv;
        si -= di * inv;
    }
    Complex64::new(sr, si)
}

fn approx_deflation(
    poles: &[Complex64],
    ring: &AngularRing,
    use_ring: bool,
    j: usize,
    lam: Complex64,
    near_count: usize,
) -> Complex64 {
    let near = if use_ring && near_count > 0 {
        near_deflation_at(poles, ring, j, lam, near_count)
    } else {
        Complex64::ZERO
    };
    let effective_near = if use_ring { near_count } else { 0 };
    near + deflation_far_estimate(lam, poles.len(), effective_near)
}

/// Near part of the deflation sum: the `near_count/2` angular neighbors
/// on each side.
fn near_deflation(
    poles: &[Complex64],
    ring: &AngularRing,
    j: usize,
    near_count: usize,
) -> Complex64 {
    near_deflation_at(poles, ring, j, poles[j], near_count)
}

fn near_deflation_at(
    poles: &[Complex64],
    ring: &AngularRing,
    j: usize,
    lam: Complex64,
    near_count: usize,
) -> Complex64 {
    let len = poles.len();
    let pos = ring.position[j] as usize;
    let half = near_count / 2;
    let (mut sr, mut si) = (0.0f64, 0.0f64);
    let mut accumulate = |idx: u32| {
        let p = poles[idx as usize];
        let dr = lam.re - p.re;
        let di = lam.im - p.im;
        let inv = 1.0 / (dr * dr + di * di);
        sr += dr * inv;
        si -= di * inv;
    };
    for k in 1..=half {
        accumulate(ring.sorted[(pos + len - k) % len]);
        accumulate(ring.sorted[(pos + k) % len]);
    }
    Complex64::new(sr, si)
}

fn gate_margin(w_inv: Complex64, approx: Complex64, config: &EaiConfig) -> f64 {
    (w_inv - approx).norm() - config.deflation_err_bound - 2.0 / config.tol_ad
}

/// Relative slack on the radial clip. The annulus can have zero width
/// (orthogonal feedback with matched filters collapses it to a curve);
/// rounding in the bound radii and in the iterates would then trap roots
/// exactly on the boundary, so clipping tolerates this much overshoot.
const CLIP_SLACK: f64 = 1e-11;

/// Radial clip onto the containment annulus at the iterate's angle.
fn clip_to_bounds(
    bounds: &MagnitudeBounds,
    candidate: Complex64,
    previous: Complex64,
) -> (Complex64, bool) {
    let r = candidate.norm();
    if r == 0.0 || !r.is_finite() {
        // Degenerate step: keep the old angle on the lower radius.
        let theta = previous.arg();
        let (lo, hi) = bounds.radii_at(theta);
        let radius = if lo > 0.0 { lo } else { hi.max(f64::MIN_POSITIVE) };
        return (Complex64::from_polar(radius, theta), true);
    }
    let (lo, hi) = bounds.radii_at(candidate.arg());
    let lo = lo * (1.0 - CLIP_SLACK);
    let hi = hi * (1.0 + CLIP_SLACK);
    if r > hi {
        (candidate * (hi / r), true)
    } else if r < lo {
        (candidate * (lo / r), true)
    } else {
        (candidate, false)
    }
}

/// Moves an estimate whose loop matrix cannot be evaluated back toward
/// the containment annulus.
fn pull_into_annulus(sys: &FdnSystem, bounds: &MagnitudeBounds, lam: Complex64) -> Complex64 {
    let max_delay = sys.delays().iter().copied().max().unwrap_or(1) as f64;
    let safe = (680.0 / max_delay).exp();
    let theta = if lam == Complex64::ZERO { 0.0 } else { lam.arg() };
    let (lo, hi) = bounds.radii_at(theta);
    let r = lam.norm().clamp((1.0 / safe).max(lo.min(1.0)), safe.min(hi.max(1.0)));
    Complex64::from_polar(r, theta)
}

/// Deterministic pseudo-random nudge: scale-relative magnitude, phase
/// hashed from pole index, sweep and attempt. Keeps retries reproducible
/// under any scheme or thread count.
fn perturb(lam: Complex64, j: usize, sweep: u32, attempt: u32, rel: f64) -> Complex64 {
    let mut h = (j as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((sweep as u64) << 32 | attempt as u64 + 1);
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    let theta = core::f64::consts::TAU * (h >> 11) as f64 / (1u64 << 53) as f64;
    let scale = lam.norm().max(f64::MIN_POSITIVE.sqrt()).max(1e-3) * rel;
    lam + Complex64::from_polar(scale, theta)
}

fn is_finite_c(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Angle-sorted index ring over the current estimates.
#[derive(Default)]
struct AngularRing {
    sorted: Vec<u32>,
    position: Vec<u32>,
    keys: Vec<(f64, u32)>,
}

impl AngularRing {
    fn new(poles: &[Complex64]) -> Self {
        let mut ring = AngularRing::default();
        ring.rebuild(poles);
        ring
    }

    fn rebuild(&mut self, poles: &[Complex64]) {
        let n = poles.len();
        self.keys.clear();
        self.keys
            .extend(poles.iter().enumerate().map(|(i, p)| (p.arg(), i as u32)));
        // Index tiebreak keeps the order total and deterministic.
        self.keys
            .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        self.sorted.clear();
        self.sorted.extend(self.keys.iter().map(|&(_, i)| i));
        self.position.resize(n, 0);
        for (pos, &idx) in self.sorted.iter().enumerate() {
            self.position[idx as usize] = pos as u32;
        }
    }
}
