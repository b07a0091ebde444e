//! Dense complex linear algebra kernels.
//!
//! Everything in this module is sized for the loop matrix of a feedback
//! delay network (`N ≤ 64`) or for the linearization oracle (`N̂ ≤ 512`),
//! so the implementations favor robustness and auditability over blocked
//! performance: partial-pivot LU with a Higham-style condition estimate,
//! a one-sided Jacobi SVD whose orthogonal factors are accurate enough to
//! form adjugates of numerically singular matrices, and a shifted QR
//! eigensolver for the oracle path.

mod eigen;
mod lu;
mod matrix;
mod svd;

pub use eigen::{eigenvalues_dense, MAX_EIGEN_DIM};
pub use lu::{lu_factor, LuFactors};
pub use matrix::ComplexMatrix;
pub use svd::{adjugate, singular_values, svd, Svd};

use core::fmt;

/// Errors reported by the dense kernels.
///
/// Factorizations of singular matrices are not errors: LU records
/// singularity in the factor object and the SVD represents rank deficiency
/// through zero singular values. Errors are reserved for requests the
/// kernels cannot serve at all.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinalgError {
    /// A matrix was singular to working precision in a context that needs
    /// to divide by its pivots (solves, inversion).
    Singular,
    /// An iterative kernel exhausted its sweep budget before reaching its
    /// termination test.
    NoConvergence { iterations: usize },
    /// The eigensolver only accepts matrices up to [`MAX_EIGEN_DIM`].
    DimensionTooLarge { dim: usize, max: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::Singular => write!(f, "matrix is singular to working precision"),
            LinalgError::NoConvergence { iterations } => {
                write!(f, "iteration failed to converge after {iterations} sweeps")
            }
            LinalgError::DimensionTooLarge { dim, max } => {
                write!(f, "dimension {dim} exceeds supported maximum {max}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LinalgError {}
