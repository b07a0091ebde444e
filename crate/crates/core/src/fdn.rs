//! Feedback delay network description and its matrix-polynomial view.
//!
//! The transfer function of an FDN with delays `m_i`, feedback matrix `A`,
//! input gains `b`, output gains `c` and direct gain `d` is
//!
//! ```text
//! H(z) = c^T [D(z)^{-1} − A]^{-1} b + d,      D(z) = diag(z^{-m_i} α_i(z))
//! ```
//!
//! where `α_i` is the absorption filter on line `i` (identity when absent).
//! The `N × N` matrix `P(z) = D(z)^{-1} − A` is the loop matrix; its
//! determinant is the generalized characteristic polynomial whose `Σ m_i`
//! roots are the system poles. Everything the solver needs from the system
//! is `P` and its derivative at a point, both cheap: the delays only enter
//! through scalar powers `z^{m_i}`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::attenuation::OnePoleFilter;
use crate::linalg::{lu_factor, ComplexMatrix};

/// Largest FDN size (number of delay lines).
pub const MAX_SIZE: usize = 64;

/// `z^{m}` overflows f64 range once `m·|ln|z||` passes `ln(MAX) ≈ 709`;
/// evaluations outside this margin are refused instead of returning inf.
const MAX_LOG_RANGE: f64 = 690.0;

/// Size cap for [`FdnSystem::gcp_coefficients`], which enumerates all
/// `2^N` principal minors of the feedback matrix.
pub const MAX_GCP_SIZE: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum FdnError {
    /// Delay lines must all have length at least one sample.
    ZeroDelay { line: usize },
    /// Number of lines exceeds [`MAX_SIZE`].
    TooManyLines { size: usize },
    /// Vector or matrix dimensions disagree with the number of delays.
    DimensionMismatch { what: &'static str },
    /// Gains and matrix entries must be finite.
    NonFinite { what: &'static str },
    /// The system must have at least one delay line.
    Empty,
}

impl fmt::Display for FdnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FdnError::ZeroDelay { line } => write!(f, "delay line {line} has zero length"),
            FdnError::TooManyLines { size } => {
                write!(f, "{size} delay lines exceed the supported maximum {MAX_SIZE}")
            }
            FdnError::DimensionMismatch { what } => write!(f, "dimension mismatch in {what}"),
            FdnError::NonFinite { what } => write!(f, "non-finite entry in {what}"),
            FdnError::Empty => write!(f, "system needs at least one delay line"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FdnError {}

/// Errors from pointwise evaluation of the loop matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    /// `|z|` is so far from the unit circle that `z^{m_i}` leaves f64
    /// range for some delay; poles of a stable realizable FDN never live
    /// there.
    OutsideAnnulus { z: Complex64 },
    /// The loop matrix is singular at `z` (the point is a pole), so the
    /// requested quantity does not exist.
    AtPole { z: Complex64 },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::OutsideAnnulus { z } => {
                write!(f, "evaluation point {z} outside the representable annulus")
            }
            EvalError::AtPole { z } => write!(f, "loop matrix singular at {z}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// Loop matrix and its derivative at one evaluation point.
#[derive(Clone, Debug)]
pub struct LoopEval {
    pub point: Complex64,
    /// `P(z) = D(z)^{-1} − A`.
    pub value: ComplexMatrix,
    /// Entrywise derivative `P'(z)`, which is diagonal; stored as the
    /// diagonal.
    pub derivative_diag: Vec<Complex64>,
}

/// A feedback delay network in delay-state form.
#[derive(Clone, Debug)]
pub struct FdnSystem {
    delays: Vec<usize>,
    feedback: ComplexMatrix,
    input_gains: Vec<Complex64>,
    output_gains: Vec<Complex64>,
    direct_gain: Complex64,
    filters: Option<Vec<OnePoleFilter>>,
}

impl FdnSystem {
    pub fn new(
        delays: Vec<usize>,
        feedback: ComplexMatrix,
        input_gains: Vec<Complex64>,
        output_gains: Vec<Complex64>,
        direct_gain: Complex64,
    ) -> Result<Self, FdnError> {
        Self::build(delays, feedback, input_gains, output_gains, direct_gain, None)
    }

    /// Attaches one absorption filter per delay line.
    pub fn with_filters(
        delays: Vec<usize>,
        feedback: ComplexMatrix,
        input_gains: Vec<Complex64>,
        output_gains: Vec<Complex64>,
        direct_gain: Complex64,
        filters: Vec<OnePoleFilter>,
    ) -> Result<Self, FdnError> {
        Self::build(
            delays,
            feedback,
            input_gains,
            output_gains,
            direct_gain,
            Some(filters),
        )
    }

    fn build(
        delays: Vec<usize>,
        feedback: ComplexMatrix,
        input_gains: Vec<Complex64>,
        output_gains: Vec<Complex64>,
        direct_gain: Complex64,
        filters: Option<Vec<OnePoleFilter>>,
    ) -> Result<Self, FdnError> {
        let n = delays.len();
        if n == 0 {
            return Err(FdnError::Empty);
        }
        if n > MAX_SIZE {
            return Err(FdnError::TooManyLines { size: n });
        }
        if let Some(line) = delays.iter().position(|&m| m == 0) {
            return Err(FdnError::ZeroDelay { line });
        }
        if feedback.rows() != n || feedback.cols() != n {
            return Err(FdnError::DimensionMismatch { what: "feedback matrix" });
        }
        if input_gains.len() != n {
            return Err(FdnError::DimensionMismatch { what: "input gains" });
        }
        if output_gains.len() != n {
            return Err(FdnError::DimensionMismatch { what: "output gains" });
        }
        if let Some(ref fs) = filters {
            if fs.len() != n {
                return Err(FdnError::DimensionMismatch { what: "filters" });
            }
        }
        if !feedback.is_finite() {
            return Err(FdnError::NonFinite { what: "feedback matrix" });
        }
        let finite = |v: &[Complex64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&input_gains) {
            return Err(FdnError::NonFinite { what: "input gains" });
        }
        if !finite(&output_gains) {
            return Err(FdnError::NonFinite { what: "output gains" });
        }
        if !direct_gain.re.is_finite() || !direct_gain.im.is_finite() {
            return Err(FdnError::NonFinite { what: "direct gain" });
        }
        Ok(FdnSystem {
            delays,
            feedback,
            input_gains,
            output_gains,
            direct_gain,
            filters,
        })
    }

    /// Number of delay lines `N`.
    pub fn size(&self) -> usize {
        self.delays.len()
    }

    /// System order `N̂ = Σ m_i`: the number of poles.
    pub fn order(&self) -> usize {
        self.delays.iter().sum()
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn feedback(&self) -> &ComplexMatrix {
        &self.feedback
    }

    pub fn input_gains(&self) -> &[Complex64] {
        &self.input_gains
    }

    pub fn output_gains(&self) -> &[Complex64] {
        &self.output_gains
    }

    pub fn direct_gain(&self) -> Complex64 {
        self.direct_gain
    }

    pub fn filters(&self) -> Option<&[OnePoleFilter]> {
        self.filters.as_deref()
    }

    /// True when all coefficients are real, so the pole set is closed
    /// under conjugation.
    pub fn is_real(&self) -> bool {
        self.feedback.data().iter().all(|z| z.im == 0.0)
            && self.input_gains.iter().all(|z| z.im == 0.0)
            && self.output_gains.iter().all(|z| z.im == 0.0)
            && self.direct_gain.im == 0.0
    }

    /// Replaces the feedback matrix by `scale · A`, leaving gains alone.
    pub fn scaled_feedback(&self, scale: f64) -> FdnSystem {
        let mut sys = self.clone();
        sys.feedback = sys.feedback.scale(Complex64::new(scale, 0.0));
        sys
    }

    /// Loop matrix `P(z)` and its derivative at `z ≠ 0`.
    ///
    /// Without filters the diagonal of `D(z)^{-1}` is `z^{m_i}`; a one-pole
    /// filter `α_i(z) = g(1−p)/(1−p z^{-1})` turns it into the polynomial
    /// `(z^{m_i} − p z^{m_i − 1}) / (g(1−p))`, keeping `det P` a polynomial
    /// of degree exactly `Σ m_i` (filter poles cancel).
    pub fn eval_loop(&self, z: Complex64) -> Result<LoopEval, EvalError> {
        let n = self.size();
        let zn = z.norm();
        if zn == 0.0 {
            return Err(EvalError::OutsideAnnulus { z });
        }
        let log_mag = zn.ln().abs();
        let max_delay = *self.delays.iter().max().expect("nonempty") as f64;
        if max_delay * log_mag > MAX_LOG_RANGE {
            return Err(EvalError::OutsideAnnulus { z });
        }

        let mut value = self.feedback.scale(-Complex64::ONE);
        let mut derivative_diag = vec![Complex64::ZERO; n];
        for i in 0..n {
            let m = self.delays[i];
            // z^{m-2}, z^{m-1}, z^m with one or two multiplies from the
            // binary power; m = 1 never uses the z^{m-2} slot.
            let (zm2, zm1) = if m >= 2 {
                let zm2 = z.powu((m - 2) as u32);
                (zm2, zm2 * z)
            } else {
                (Complex64::ZERO, Complex64::ONE)
            };
            let zm = zm1 * z;
            let (val, der) = match self.filters.as_ref().map(|f| f[i]) {
                None => (zm, zm1 * m as f64),
                Some(filter) => {
                    let p = filter.pole();
                    let inv_gain = 1.0 / (filter.gain() * (1.0 - p));
                    let val = (zm - zm1 * p) * inv_gain;
                    let der = (zm1 * m as f64 - zm2 * (p * (m as f64 - 1.0))) * inv_gain;
                    (val, der)
                }
            };
            value[(i, i)] += val;
            derivative_diag[i] = der;
        }
        Ok(LoopEval {
            point: z,
            value,
            derivative_diag,
        })
    }

    /// Transfer function `H(z) = c^T P(z)^{-1} b + d`.
    pub fn transfer_function(&self, z: Complex64) -> Result<Complex64, EvalError> {
        let eval = self.eval_loop(z)?;
        let factors = lu_factor(&eval.value);
        if factors.is_singular() {
            return Err(EvalError::AtPole { z });
        }
        let x = factors.solve(&self.input_gains).map_err(|_| EvalError::AtPole { z })?;
        let mut h = self.direct_gain;
        for (ci, xi) in self.output_gains.iter().zip(&x) {
            h += ci * xi;
        }
        Ok(h)
    }

    /// Impulse response by running the delay-state recursion; the
    /// reference that modal resynthesis is verified against.
    pub fn impulse_response(&self, len: usize) -> Vec<Complex64> {
        let n = self.size();
        let mut rings: Vec<Vec<Complex64>> =
            self.delays.iter().map(|&m| vec![Complex64::ZERO; m]).collect();
        let mut heads = vec![0usize; n];
        let mut filter_state = vec![Complex64::ZERO; n];
        let mut line_out = vec![Complex64::ZERO; n];
        let mut out = Vec::with_capacity(len);

        for step in 0..len {
            let x = if step == 0 { Complex64::ONE } else { Complex64::ZERO };
            for i in 0..n {
                let tapped = rings[i][heads[i]];
                line_out[i] = match self.filters.as_ref().map(|f| f[i]) {
                    None => tapped,
                    Some(filter) => {
                        // y[k] = g(1−p) x[k] + p y[k−1]
                        let y = tapped * (filter.gain() * (1.0 - filter.pole()))
                            + filter_state[i] * filter.pole();
                        filter_state[i] = y;
                        y
                    }
                };
            }
            let mut y = self.direct_gain * x;
            for i in 0..n {
                y += self.output_gains[i] * line_out[i];
            }
            out.push(y);
            for i in 0..n {
                let mut into = self.input_gains[i] * x;
                for j in 0..n {
                    into += self.feedback[(i, j)] * line_out[j];
                }
                rings[i][heads[i]] = into;
                heads[i] += 1;
                if heads[i] == rings[i].len() {
                    heads[i] = 0;
                }
            }
        }
        out
    }

    /// Coefficients of the generalized characteristic polynomial
    /// `det(diag(z^{m_i}) − A)`, lowest power first, by principal-minor
    /// expansion over all index subsets:
    ///
    /// ```text
    /// det = Σ_{S ⊆ [N]} z^{Σ_{i∈S} m_i} (−1)^{N−|S|} det(A[S̄, S̄])
    /// ```
    ///
    /// Exponential in `N`, so restricted to `N ≤ 8` and systems without
    /// filters; this is a cross-check path, not the solver.
    pub fn gcp_coefficients(&self) -> Result<Vec<Complex64>, GcpError> {
        let n = self.size();
        if n > MAX_GCP_SIZE {
            return Err(GcpError::TooLarge { size: n });
        }
        if self.filters.is_some() {
            return Err(GcpError::FiltersUnsupported);
        }
        let mut coeffs = vec![Complex64::ZERO; self.order() + 1];
        let mut members = Vec::with_capacity(n);
        for mask in 0u32..(1u32 << n) {
            members.clear();
            let mut degree = 0usize;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    degree += self.delays[i];
                } else {
                    members.push(i);
                }
            }
            let k = members.len();
            let minor = if k == 0 {
                Complex64::ONE
            } else {
                let sub = ComplexMatrix::from_fn(k, k, |r, c| {
                    self.feedback[(members[r], members[c])]
                });
                lu_factor(&sub).det()
            };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[degree] += minor * sign;
        }
        Ok(coeffs)
    }
}

/// Errors from [`FdnSystem::gcp_coefficients`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GcpError {
    TooLarge { size: usize },
    FiltersUnsupported,
}

impl fmt::Display for GcpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GcpError::TooLarge { size } => write!(
                f,
                "coefficient expansion is exponential in size; {size} exceeds {MAX_GCP_SIZE}"
            ),
            GcpError::FiltersUnsupported => {
                write!(f, "coefficient expansion only covers unfiltered systems")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GcpError {}

/// Evaluates a polynomial given lowest-first coefficients (Horner).
pub fn polyval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Circular shift feedback matrix: line `i` feeds line `i−1`, so the FDN
/// degenerates to one long delay of length `Σ m_i` and its poles are the
/// `N̂`-th roots of unity.
pub fn circular_shift_matrix(n: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, (i + 1) % n)] = Complex64::ONE;
    }
    m
}
