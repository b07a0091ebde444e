//! Residues, modal resynthesis and verification.
//!
//! With all poles in hand, the partial fraction expansion of the transfer
//! function is
//!
//! ```text
//! H(z) = d + Σ_i ρ_i / (z − λ_i),     ρ_i = q(λ_i) / p'(λ_i)
//! ```
//!
//! where `p = det P` and `q = c^T adj(P) b` is the numerator. Both values
//! come from the adjugate of the loop matrix at the pole: by Jacobi's
//! formula `p'(λ) = tr(adj(P(λ)) P'(λ))`, and the adjugate stays finite
//! and accurate exactly where `P` itself is singular, which is the whole
//! point of evaluating it through the SVD. `ρ̄_i = 1/p'(λ_i)` is the
//! undriven (common-pole) residue independent of `b`, `c`; the full
//! `N × N` adjugate is the drive map: entry `(o, s)` is the numerator the
//! mode would have when driven at line `s` and observed at line `o`.
//!
//! The expansion convention pairs with the impulse response as
//! `h(0) = d`, `h(n) = Σ_i ρ_i λ_i^{n−1}` for `n ≥ 1`; resynthesis and
//! [`verification_error`] implement exactly that sum, so a decomposition
//! can be checked end to end against the recursion of
//! [`FdnSystem::impulse_response`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fdn::{EvalError, FdnSystem};
use crate::linalg::{adjugate, ComplexMatrix};
use crate::solver::PoleSet;

/// One pole/residue pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub pole: Complex64,
    /// Driven residue `ρ = q(λ)/p'(λ)` for the system's `b`, `c`.
    pub residue: Complex64,
    /// Undriven residue `ρ̄ = 1/p'(λ)`.
    pub undriven_residue: Complex64,
    /// Input-output drive `q(λ) = c^T adj(P(λ)) b`, so `ρ = q·ρ̄`.
    pub drive: Complex64,
}

/// Complete modal decomposition of one FDN.
#[derive(Clone, Debug)]
pub struct ModalDecomposition {
    pub direct_gain: Complex64,
    pub modes: Vec<Mode>,
}

impl ModalDecomposition {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModalError {
    /// Residues are only defined once every pole has converged.
    Unconverged { poles: usize },
    /// `p'(λ) = 0`: the pole is multiple (or flagged so numerically);
    /// the simple-pole expansion does not exist.
    NonSimplePole { index: usize, pole: Complex64 },
    Eval(EvalError),
}

impl fmt::Display for ModalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModalError::Unconverged { poles } => {
                write!(f, "{poles} pole(s) not converged; residues undefined")
            }
            ModalError::NonSimplePole { index, pole } => {
                write!(f, "pole {index} at {pole} is not simple (p' = 0)")
            }
            ModalError::Eval(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ModalError {}

impl From<EvalError> for ModalError {
    fn from(e: EvalError) -> Self {
        ModalError::Eval(e)
    }
}

/// `p'(λ) = tr(adj(P(λ)) P'(λ))` at one pole estimate.
///
/// Errors with [`ModalError::NonSimplePole`] when the trace vanishes:
/// `adj(P) = 0` happens exactly when `rank P < N−1`, i.e. at a multiple
/// eigenvalue of the loop structure.
pub fn gcp_derivative_at_pole(sys: &FdnSystem, pole: Complex64) -> Result<Complex64, ModalError> {
    let (derivative, _) = derivative_and_adjugate(sys, pole)?;
    if derivative == Complex64::ZERO {
        return Err(ModalError::NonSimplePole { index: 0, pole });
    }
    Ok(derivative)
}

fn derivative_and_adjugate(
    sys: &FdnSystem,
    pole: Complex64,
) -> Result<(Complex64, ComplexMatrix), ModalError> {
    let eval = sys.eval_loop(pole)?;
    let adj = adjugate(&eval.value);
    // P' is diagonal, so the trace needs only the adjugate diagonal.
    let mut derivative = Complex64::ZERO;
    for i in 0..sys.size() {
        derivative += adj[(i, i)] * eval.derivative_diag[i];
    }
    Ok((derivative, adj))
}

/// Residues for every pole of a converged set.
pub fn residues(sys: &FdnSystem, poles: &PoleSet) -> Result<ModalDecomposition, ModalError> {
    residues_impl(sys, poles, false).map(|(dec, _)| dec)
}

/// Residues plus the full drive map `adj(P(λ_i))` per mode. Entry
/// `(o, s)` of matrix `i` is the mode's numerator when driven at line `s`
/// and observed at line `o`; `c^T adj b` recovers the driven numerator.
pub fn residues_with_drive_maps(
    sys: &FdnSystem,
    poles: &PoleSet,
) -> Result<(ModalDecomposition, Vec<ComplexMatrix>), ModalError> {
    residues_impl(sys, poles, true).map(|(dec, maps)| (dec, maps.expect("requested")))
}

fn residues_impl(
    sys: &FdnSystem,
    poles: &PoleSet,
    keep_maps: bool,
) -> Result<(ModalDecomposition, Option<Vec<ComplexMatrix>>), ModalError> {
    let unconverged = poles.unconverged_count();
    if unconverged > 0 {
        return Err(ModalError::Unconverged { poles: unconverged });
    }
    let b = sys.input_gains();
    let c = sys.output_gains();
    let compute = |(index, &pole): (usize, &Complex64)| -> Result<(Mode, Option<ComplexMatrix>), ModalError> {
        let (derivative, adj) = derivative_and_adjugate(sys, pole)?;
        if derivative == Complex64::ZERO {
            return Err(ModalError::NonSimplePole { index, pole });
        }
        // q = c^T adj b.
        let mut q = Complex64::ZERO;
        for o in 0..sys.size() {
            let mut row = Complex64::ZERO;
            for s in 0..sys.size() {
                row += adj[(o, s)] * b[s];
            }
            q += c[o] * row;
        }
        let undriven = derivative.inv();
        let mode = Mode {
            pole,
            residue: q * undriven,
            undriven_residue: undriven,
            drive: q,
        };
        Ok((mode, keep_maps.then_some(adj)))
    };

    let results: Result<Vec<_>, ModalError> = {
        #[cfg(feature = "rayon")]
        {
            use rayon::prelude::*;
            poles.poles.par_iter().enumerate().map(compute).collect()
        }
        #[cfg(not(feature = "rayon"))]
        {
            poles.poles.iter().enumerate().map(compute).collect()
        }
    };
    let results = results?;

    let mut modes = Vec::with_capacity(results.len());
    let mut maps = keep_maps.then(|| Vec::with_capacity(results.len()));
    for (mode, adj) in results {
        modes.push(mode);
        if let (Some(maps), Some(adj)) = (maps.as_mut(), adj) {
            maps.push(adj);
        }
    }
    Ok((
        ModalDecomposition {
            direct_gain: sys.direct_gain(),
            modes,
        },
        maps,
    ))
}

/// Time block length for the power recurrences in [`synthesize`]: powers
/// are restarted from `λ^{n}` at block boundaries so rounding drift stays
/// at the block scale instead of growing with the response length.
const SYNTH_BLOCK: usize = 1024;

/// Renders `h(0) = d, h(n) = Σ_i ρ_i λ_i^{n−1}` for `n < len`.
pub fn synthesize(dec: &ModalDecomposition, len: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; len];
    if len == 0 {
        return out;
    }
    out[0] = dec.direct_gain;
    synthesize_add(&dec.modes, &mut out[1..]);
    out
}

/// Adds `Σ_i ρ_i λ_i^{n}` for `n = 0..buf.len()` into `buf` (the tail of
/// a response starting at sample 1).
fn synthesize_add(modes: &[Mode], buf: &mut [Complex64]) {
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        // Deterministic parallel reduction: fixed mode chunks, ordered sum.
        const MODES_PER_CHUNK: usize = 256;
        if modes.len() > 2 * MODES_PER_CHUNK {
            let partials: Vec<Vec<Complex64>> = modes
                .par_chunks(MODES_PER_CHUNK)
                .map(|chunk| {
                    let mut acc = vec![Complex64::ZERO; buf.len()];
                    accumulate_modes(chunk, &mut acc);
                    acc
                })
                .collect();
            for partial in partials {
                for (o, p) in buf.iter_mut().zip(partial) {
                    *o += p;
                }
            }
            return;
        }
    }
    accumulate_modes(modes, buf);
}

fn accumulate_modes(modes: &[Mode], buf: &mut [Complex64]) {
    for mode in modes {
        let mut n0 = 0usize;
        while n0 < buf.len() {
            let n1 = (n0 + SYNTH_BLOCK).min(buf.len());
            let mut w = mode.residue * mode.pole.powu(n0 as u32);
            for slot in &mut buf[n0..n1] {
                *slot += w;
                w *= mode.pole;
            }
            n0 = n1;
        }
    }
}

/// Maximum absolute sample error between the resynthesized response and
/// the reference recursion over `len` samples.
pub fn verification_error(sys: &FdnSystem, dec: &ModalDecomposition, len: usize) -> f64 {
    let reference = sys.impulse_response(len);
    let synthesized = synthesize(dec, len);
    reference
        .iter()
        .zip(&synthesized)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{EaiConfig, PoleStatus, StopReason};
    use alloc::vec;

    fn comb(mlen: usize, g: f64) -> FdnSystem {
        FdnSystem::new(
            vec![mlen],
            ComplexMatrix::from_real(1, 1, &[g]),
            vec![Complex64::ONE],
            vec![Complex64::ONE],
            Complex64::ZERO,
        )
        .unwrap()
    }

    fn converged_set(poles: Vec<Complex64>) -> PoleSet {
        let n = poles.len();
        PoleSet {
            poles,
            status: vec![PoleStatus::Converged(StopReason::Rcond); n],
            iterations: vec![0; n],
        }
    }

    #[test]
    fn first_order_loop_has_unit_residue() {
        // m = 1: H(z) = 1/(z − g); ρ = 1, ρ̄ = 1 (p' = 1).
        let sys = comb(1, 0.35);
        let dec = residues(&sys, &converged_set(vec![Complex64::new(0.35, 0.0)])).unwrap();
        assert!((dec.modes[0].residue - Complex64::ONE).norm() < 1e-14);
        assert!((dec.modes[0].undriven_residue - Complex64::ONE).norm() < 1e-14);
    }

    #[test]
    fn comb_residues_match_closed_form() {
        // z^m = g: p' = m λ^{m−1}, q = 1 ⇒ ρ = λ^{1−m}/m = λ/(m·g).
        let m = 4;
        let g = 0.6f64;
        let sys = comb(m, g);
        let radius = g.powf(1.0 / m as f64);
        let poles: Vec<Complex64> = (0..m)
            .map(|k| Complex64::from_polar(radius, core::f64::consts::TAU * k as f64 / m as f64))
            .collect();
        let dec = residues(&sys, &converged_set(poles.clone())).unwrap();
        for (p, mode) in poles.iter().zip(&dec.modes) {
            let expect = p / (m as f64 * g);
            assert!((mode.residue - expect).norm() < 1e-13);
            let expect_undriven = (m as f64 * p.powu(m as u32 - 1)).inv();
            assert!((mode.undriven_residue - expect_undriven).norm() < 1e-13);
        }
    }

    #[test]
    fn synthesis_matches_recursion_for_a_comb() {
        let sys = comb(3, 0.8);
        let (poles, _) = crate::solver::solve(&sys, &EaiConfig::for_order(3)).unwrap();
        let dec = residues(&sys, &poles).unwrap();
        let err = verification_error(&sys, &dec, 64);
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn direct_gain_appears_only_at_sample_zero() {
        let dec = ModalDecomposition {
            direct_gain: Complex64::new(2.5, 0.0),
            modes: vec![],
        };
        let h = synthesize(&dec, 3);
        assert_eq!(h[0], Complex64::new(2.5, 0.0));
        assert_eq!(h[1], Complex64::ZERO);
        assert_eq!(h[2], Complex64::ZERO);
    }

    #[test]
    fn residues_refuse_unconverged_sets() {
        let sys = comb(2, 0.5);
        let mut set = converged_set(vec![Complex64::ONE, -Complex64::ONE]);
        set.status[1] = PoleStatus::MaxIter;
        assert_eq!(
            residues(&sys, &set).unwrap_err(),
            ModalError::Unconverged { poles: 1 }
        );
    }

    #[test]
    fn drive_maps_reduce_to_the_driven_numerator() {
        let sys = comb(3, 0.9);
        let (poles, _) = crate::solver::solve(&sys, &EaiConfig::for_order(3)).unwrap();
        let (dec, maps) = residues_with_drive_maps(&sys, &poles).unwrap();
        for (mode, map) in dec.modes.iter().zip(&maps) {
            // b = c = [1]: the 1x1 drive map is q itself.
            let q = map[(0, 0)];
            assert!((mode.residue - q * mode.undriven_residue).norm() < 1e-14);
        }
    }

    use crate::linalg::ComplexMatrix;
}
