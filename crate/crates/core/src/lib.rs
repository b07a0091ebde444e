//! Modal decomposition of feedback delay networks.
//!
//! A feedback delay network (FDN) of size `N` couples `N` delay lines of
//! lengths `m_1..m_N` through a feedback matrix `A`, with input gains `b`,
//! output gains `c` and a direct gain `d`. Its transfer function is a
//! rational function of system order `N̂ = Σ m_i`, so it carries exactly
//! `N̂` modes: pole/residue pairs of the partial fraction expansion
//!
//! ```text
//! H(z) = d + Σ_i ρ_i / (z − λ_i)
//! ```
//!
//! This crate finds all `N̂` poles as roots of the generalized
//! characteristic polynomial `det(D(z)^{-1} − A)` without ever expanding
//! polynomial coefficients. The solver is an Ehrlich-Aberth iteration that
//! works directly on the `N × N` loop matrix, so cost per sweep scales with
//! the number of poles times a small matrix factorization rather than with
//! a companion eigenproblem of dimension `N̂`. Residues come from the same
//! loop matrix through its adjugate, and a time-domain resynthesis check
//! ([`modal::verification_error`]) bounds the end-to-end accuracy of a
//! decomposition against the reference recursion.
//!
//! Modules:
//!
//! * [`linalg`]: dense complex kernels (LU, one-sided Jacobi SVD, adjugate,
//!   Hessenberg QR eigenvalues) used by everything else.
//! * [`fdn`]: the system description, loop-matrix evaluation, reference
//!   impulse response and small-size polynomial coefficient expansion.
//! * [`attenuation`]: decay targets, one-pole absorption filters and the
//!   pole magnitude bounds that seed and clip the solver.
//! * [`solver`]: the Ehrlich-Aberth iteration with exact and approximate
//!   deflation.
//! * [`modal`]: residues, drive maps, resynthesis and verification.
//! * [`analysis`]: random orthogonal ensembles, pole statistics and the
//!   linearization oracle used for cross-checking.
//!
//! The crate is `no_std` compatible (requires `alloc`); the `std` feature
//! (default) adds wall-clock timing in solver statistics, and the `rayon`
//! feature parallelizes per-pole sweeps and ensemble trials.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod attenuation;
pub mod fdn;
pub mod linalg;
pub mod modal;
pub mod solver;

pub use num_complex::Complex64;
