//! Decay targets, absorption filters and pole magnitude bounds.
//!
//! Reverberation time maps to per-sample decay through
//! `γ = 10^{−3 / (T60 · Fs)}`; a delay line of length `m` then wants a
//! cumulative gain `γ^m`. A frequency-dependent target is met with one
//! one-pole lowpass per line, designed to hit the DC and Nyquist targets
//! exactly.
//!
//! The same machinery yields rigorous containment bounds for the pole
//! magnitudes of the whole network, used by the solver both to seed the
//! iteration and to clip runaway steps: a Rouché-type argument confines
//! every pole `λ` to the annulus where the diagonal delay terms can be
//! matched by the feedback matrix, giving per-angle radii driven by the
//! extreme singular values of `A` and the filter responses.

use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fdn::FdnSystem;
use crate::linalg::{singular_values, LinalgError};

/// First-order absorption filter `α(z) = g (1−p) / (1 − p z^{-1})`.
///
/// `g` is the DC gain, `p ∈ (−1, 1)` the real pole; the magnitude response
/// decreases monotonically from `|g|` at DC to `|g|(1−p)/(1+p)` at Nyquist
/// for `p > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OnePoleFilter {
    gain: f64,
    pole: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FilterError {
    /// The filter pole must satisfy `|p| < 1`.
    UnstablePole { pole: f64 },
    /// Gain and pole must be finite, gain nonzero.
    InvalidParameter,
}

impl fmt::Display for FilterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterError::UnstablePole { pole } => {
                write!(f, "one-pole filter requires |p| < 1, got p = {pole}")
            }
            FilterError::InvalidParameter => write!(f, "filter parameters must be finite and g ≠ 0"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FilterError {}

impl OnePoleFilter {
    pub fn new(gain: f64, pole: f64) -> Result<Self, FilterError> {
        if !gain.is_finite() || !pole.is_finite() || gain == 0.0 {
            return Err(FilterError::InvalidParameter);
        }
        if pole.abs() >= 1.0 {
            return Err(FilterError::UnstablePole { pole });
        }
        Ok(OnePoleFilter { gain, pole })
    }

    /// Frequency-independent attenuation: `α(z) = g`.
    pub fn pure_gain(gain: f64) -> Self {
        OnePoleFilter { gain, pole: 0.0 }
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn pole(&self) -> f64 {
        self.pole
    }

    /// `α(z)`.
    pub fn response(&self, z: Complex64) -> Complex64 {
        self.gain * (1.0 - self.pole) / (Complex64::ONE - self.pole * z.inv())
    }

    /// `|α(e^{iθ})|` without complex division:
    /// `|1 − p e^{-iθ}|² = 1 − 2p cos θ + p²`.
    pub fn magnitude_at_angle(&self, theta: f64) -> f64 {
        self.magnitude_at(1.0, theta)
    }

    /// `|α(r e^{iθ})|`: the response magnitude off the unit circle, with
    /// `p/r` in place of `p` in the denominator. Pole radii sit slightly
    /// inside the circle, where this differs from the on-circle response
    /// by enough to matter for containment.
    pub fn magnitude_at(&self, radius: f64, theta: f64) -> f64 {
        let q = self.pole / radius;
        let denom_sqr = 1.0 - 2.0 * q * theta.cos() + q * q;
        (self.gain * (1.0 - self.pole)).abs() / denom_sqr.sqrt()
    }
}

/// How per-line decay targets translate to filter designs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttenuationMode {
    /// Each line is designed for its own length `m_i` (physically exact).
    DelayProportional,
    /// Every line uses the same nominal length, giving identical filters;
    /// decay then varies slightly with the actual delays.
    AverageDelay(f64),
}

/// Frequency-dependent reverberation target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttenuationSpec {
    /// Reverberation time at DC, seconds.
    pub t60_dc: f64,
    /// Reverberation time at Nyquist, seconds.
    pub t60_nyquist: f64,
    /// Sample rate, Hz.
    pub sample_rate: f64,
    pub mode: AttenuationMode,
}

/// Per-sample decay factor for a T60 target: `γ = 10^{−3/(T60·Fs)}`,
/// the gain whose `T60·Fs`-fold application is −60 dB.
pub fn gamma_from_t60(t60: f64, sample_rate: f64) -> f64 {
    10.0f64.powf(-3.0 / (t60 * sample_rate))
}

/// Inverse of [`gamma_from_t60`]: `T60 = −3 / (Fs · log10 γ)`.
pub fn t60_from_gamma(gamma: f64, sample_rate: f64) -> f64 {
    -3.0 / (sample_rate * gamma.log10())
}

/// Decay time of a single mode from its pole radius, `None` for modes
/// that do not decay (`|λ| ≥ 1`) or are degenerate (`λ = 0`).
pub fn mode_t60(pole: Complex64, sample_rate: f64) -> Option<f64> {
    let r = pole.norm();
    if r <= 0.0 || r >= 1.0 {
        return None;
    }
    Some(t60_from_gamma(r, sample_rate))
}

/// Designs the absorption filter for one delay line.
///
/// The line must supply cumulative decay `γ_dc^m` at DC and `γ_ny^m` at
/// Nyquist, so with `r = (γ_ny/γ_dc)^m`:
///
/// ```text
/// g = γ_dc^m,    p = (1 − r) / (1 + r)
/// ```
///
/// which hits both band edges exactly: `α(1) = g`, `α(−1) = g·r`.
pub fn design_one_pole(spec: &AttenuationSpec, delay: usize) -> OnePoleFilter {
    let m = match spec.mode {
        AttenuationMode::DelayProportional => delay as f64,
        AttenuationMode::AverageDelay(avg) => avg,
    };
    // Single exponentials: γ^m = 10^{−3m/(T60·Fs)} evaluated directly,
    // so the exponent error is not amplified m-fold as with powf(γ, m).
    let exp_dc = -3.0 * m / (spec.t60_dc * spec.sample_rate);
    let exp_ny = -3.0 * m / (spec.t60_nyquist * spec.sample_rate);
    let g = 10.0f64.powf(exp_dc);
    let r = 10.0f64.powf(exp_ny - exp_dc);
    let p = (1.0 - r) / (1.0 + r);
    OnePoleFilter { gain: g, pole: p }
}

/// Containment annulus for the pole magnitudes of an FDN.
///
/// For an unfiltered network with feedback singular values
/// `σ_min ≤ … ≤ σ_max` every pole satisfies
///
/// ```text
/// min_i σ_min^{1/m_i} ≤ |λ| ≤ max_i σ_max^{1/m_i}
/// ```
///
/// With absorption filters the effective per-line gain depends on the
/// angle, so the radii become functions of `θ`: per line, the radius
/// where `|λ|^{m_i} = σ·|α_i(λ)|`, solved at the actual radius by
/// [`line_radius`]. A singular feedback matrix drops the lower bound to
/// zero. The upper radius is clamped to at least the lower one so the
/// annulus is never empty.
#[derive(Clone, Debug)]
pub enum MagnitudeBounds {
    Constant {
        lower: f64,
        upper: f64,
    },
    PerAngle {
        sigma_min: f64,
        sigma_max: f64,
        delays: Vec<usize>,
        filters: Vec<OnePoleFilter>,
    },
}

impl MagnitudeBounds {
    /// Lower and upper radius at angle `θ`.
    pub fn radii_at(&self, theta: f64) -> (f64, f64) {
        match self {
            MagnitudeBounds::Constant { lower, upper } => (*lower, upper.max(*lower)),
            MagnitudeBounds::PerAngle {
                sigma_min,
                sigma_max,
                delays,
                filters,
            } => {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for (&m, filter) in delays.iter().zip(filters) {
                    lo = lo.min(line_radius(*sigma_min, m, filter, theta));
                    hi = hi.max(line_radius(*sigma_max, m, filter, theta));
                }
                (lo, hi.max(lo))
            }
        }
    }

    pub fn lower_at(&self, theta: f64) -> f64 {
        self.radii_at(theta).0
    }

    pub fn upper_at(&self, theta: f64) -> f64 {
        self.radii_at(theta).1
    }

    /// True when `λ` lies inside the annulus with slack `tol` on both
    /// radii.
    pub fn contains(&self, pole: Complex64, tol: f64) -> bool {
        let (lo, hi) = self.radii_at(pole.arg());
        let r = pole.norm();
        r >= lo - tol && r <= hi + tol
    }
}

/// Radius where one line's loop gain crosses `σ`: the solution of
/// `r^m = σ |α(r e^{iθ})|`, found as a fixed point of
/// `r ← (σ |α(r e^{iθ})|)^{1/m}`. The map contracts with factor about
/// `|p| / m`, so a few iterations reach machine precision. Evaluating α
/// at the actual radius instead of on the unit circle matters: poles sit
/// a hair inside the circle, and the on-circle radii can exclude true
/// poles by ~1e-8, which traps the solver's radial clipping.
fn line_radius(sigma: f64, m: usize, filter: &OnePoleFilter, theta: f64) -> f64 {
    let inv_m = 1.0 / m as f64;
    let mut r = (sigma * filter.magnitude_at_angle(theta)).powf(inv_m);
    if !(r > 0.0) || filter.pole() == 0.0 {
        return r;
    }
    for _ in 0..3 {
        r = (sigma * filter.magnitude_at(r, theta)).powf(inv_m);
    }
    r
}

/// Pole magnitude bounds of a system from the extreme singular values of
/// its feedback matrix and its absorption filters.
pub fn magnitude_bounds(sys: &FdnSystem) -> Result<MagnitudeBounds, LinalgError> {
    let sigma = singular_values(sys.feedback())?;
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let sigma_min = sigma.last().copied().unwrap_or(0.0);
    match sys.filters() {
        None => {
            let mut lower = f64::INFINITY;
            let mut upper = 0.0f64;
            for &m in sys.delays() {
                let inv_m = 1.0 / m as f64;
                lower = lower.min(sigma_min.powf(inv_m));
                upper = upper.max(sigma_max.powf(inv_m));
            }
            Ok(MagnitudeBounds::Constant {
                lower,
                upper: upper.max(lower),
            })
        }
        Some(filters) => Ok(MagnitudeBounds::PerAngle {
            sigma_min,
            sigma_max,
            delays: sys.delays().to_vec(),
            filters: filters.to_vec(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdn::circular_shift_matrix;
    use alloc::vec;

    #[test]
    fn gamma_round_trips_through_t60() {
        let fs = 48_000.0;
        for &t60 in &[0.1, 0.4, 2.0, 10.0] {
            let g = gamma_from_t60(t60, fs);
            assert!(g > 0.0 && g < 1.0);
            assert!((t60_from_gamma(g, fs) - t60).abs() < 1e-9 * t60);
        }
    }

    #[test]
    fn unit_gamma_needs_infinite_t60() {
        // γ → 1 as T60 → ∞; a pure delay loses nothing.
        assert!((gamma_from_t60(f64::INFINITY, 48_000.0) - 1.0).abs() == 0.0);
    }

    #[test]
    fn design_hits_both_band_edges_exactly() {
        let spec = AttenuationSpec {
            t60_dc: 2.0,
            t60_nyquist: 0.4,
            sample_rate: 48_000.0,
            mode: AttenuationMode::DelayProportional,
        };
        let m = 1000.0;
        let f = design_one_pole(&spec, 1000);
        let dc = f.response(Complex64::ONE).norm();
        let ny = f.response(-Complex64::ONE).norm();
        let expect_dc = 10.0f64.powf(-3.0 * m / (2.0 * 48_000.0));
        let expect_ny = 10.0f64.powf(-3.0 * m / (0.4 * 48_000.0));
        assert!((dc - expect_dc).abs() < 1e-14);
        assert!((ny - expect_ny).abs() < 1e-14);
        // Lowpass: longer decay at DC than at Nyquist means p > 0.
        assert!(f.pole() > 0.0 && f.pole() < 1.0);
    }

    #[test]
    fn magnitude_at_angle_matches_complex_response() {
        let f = OnePoleFilter::new(0.9, 0.35).unwrap();
        for k in 0..16 {
            let theta = core::f64::consts::PI * (k as f64 / 8.0 - 1.0) + 0.01;
            let z = Complex64::new(theta.cos(), theta.sin());
            assert!((f.magnitude_at_angle(theta) - f.response(z).norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn mode_t60_inverts_gamma() {
        let fs = 48_000.0;
        let gamma = gamma_from_t60(1.5, fs);
        let pole = Complex64::from_polar(gamma, 0.7);
        let t = mode_t60(pole, fs).unwrap();
        assert!((t - 1.5).abs() < 1e-9);
        assert!(mode_t60(Complex64::ONE, fs).is_none());
        assert!(mode_t60(Complex64::ZERO, fs).is_none());
    }

    #[test]
    fn unitary_feedback_gives_unit_circle_bounds() {
        let sys = FdnSystem::new(
            vec![3, 5, 7],
            circular_shift_matrix(3),
            vec![Complex64::ONE; 3],
            vec![Complex64::ONE; 3],
            Complex64::ZERO,
        )
        .unwrap();
        let bounds = magnitude_bounds(&sys).unwrap();
        let (lo, hi) = bounds.radii_at(0.3);
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_feedback_bounds_follow_the_delay_extremes() {
        // A = 0.5 · (shift): σ = 0.5; bounds [0.5^{1/2}, 0.5^{1/5}].
        let a = circular_shift_matrix(2).scale(Complex64::new(0.5, 0.0));
        let sys = FdnSystem::new(
            vec![2, 5],
            a,
            vec![Complex64::ONE; 2],
            vec![Complex64::ONE; 2],
            Complex64::ZERO,
        )
        .unwrap();
        let bounds = magnitude_bounds(&sys).unwrap();
        let (lo, hi) = bounds.radii_at(1.0);
        assert!((lo - 0.5.powf(0.5)).abs() < 1e-15);
        assert!((hi - 0.5.powf(0.2)).abs() < 1e-15);
    }

    #[test]
    fn filtered_bounds_vary_with_angle() {
        let spec = AttenuationSpec {
            t60_dc: 2.0,
            t60_nyquist: 0.4,
            sample_rate: 48_000.0,
            mode: AttenuationMode::DelayProportional,
        };
        let delays = vec![100usize, 150];
        let filters: Vec<OnePoleFilter> =
            delays.iter().map(|&m| design_one_pole(&spec, m)).collect();
        let sys = FdnSystem::with_filters(
            delays,
            circular_shift_matrix(2),
            vec![Complex64::ONE; 2],
            vec![Complex64::ONE; 2],
            Complex64::ZERO,
            filters,
        )
        .unwrap();
        let bounds = magnitude_bounds(&sys).unwrap();
        let (lo_dc, hi_dc) = bounds.radii_at(0.0);
        let (lo_ny, hi_ny) = bounds.radii_at(core::f64::consts::PI);
        // Lowpass absorption: tighter magnitudes at Nyquist.
        assert!(hi_ny < lo_dc);
        assert!(lo_dc <= hi_dc && lo_ny <= hi_ny);
        // Radii track the designed per-sample decay at the edges. They are
        // not exactly γ: the filter is evaluated at the radius itself, a
        // relative shift of about p(1−γ)/m.
        let gamma_dc = gamma_from_t60(2.0, 48_000.0);
        let gamma_ny = gamma_from_t60(0.4, 48_000.0);
        assert!((lo_dc - gamma_dc).abs() < 1e-6);
        assert!((hi_dc - gamma_dc).abs() < 1e-6);
        assert!((lo_ny - gamma_ny).abs() < 1e-6);
        assert!((hi_ny - gamma_ny).abs() < 1e-6);
        // The sharp property: each radius solves r^m = σ·|α(r e^{iθ})| for
        // some line (the extremal one; σ = 1 for a shift matrix).
        let MagnitudeBounds::PerAngle { ref filters, ref delays, .. } = bounds else {
            panic!("filtered system");
        };
        for &(theta, r) in &[(0.0, lo_dc), (core::f64::consts::PI, hi_ny)] {
            let best = delays
                .iter()
                .zip(filters)
                .map(|(&m, f)| (r.powi(m as i32) - f.magnitude_at(r, theta)).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-14, "{best:.3e}");
        }
    }
}
