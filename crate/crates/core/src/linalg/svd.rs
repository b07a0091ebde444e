use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::{lu_factor, ComplexMatrix, LinalgError};

const MAX_JACOBI_SWEEPS: usize = 64;

/// Full singular value decomposition `M = U Σ V^H` of a square matrix.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    /// Singular values in descending order.
    pub sigma: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Singular values of a square matrix, descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>, LinalgError> {
    svd(m).map(|s| s.sigma)
}

/// One-sided Jacobi SVD of a square matrix.
///
/// Column pairs of the working matrix are rotated until all are mutually
/// orthogonal relative to machine precision; the rotations accumulate into
/// `V`, column norms become `Σ` and normalized columns become `U`. Columns
/// whose norm underflows the numerical rank threshold are replaced by
/// completing `U` to an orthonormal basis, which is what lets adjugates of
/// exactly singular matrices come out finite.
pub fn svd(m: &ComplexMatrix) -> Result<Svd, LinalgError> {
    let (result, converged) = jacobi_svd(m);
    if converged {
        Ok(result)
    } else {
        Err(LinalgError::NoConvergence {
            iterations: MAX_JACOBI_SWEEPS,
        })
    }
}

fn jacobi_svd(m: &ComplexMatrix) -> (Svd, bool) {
    assert!(m.is_square(), "SVD restricted to square matrices here");
    let n = m.rows();
    let mut w = m.clone();
    let mut v = ComplexMatrix::identity(n);
    let mut converged = n < 2;

    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = column_gram(&w, p, q);
                // Relative orthogonality test; also skips exactly zero
                // columns, whose pairs carry no information.
                if gamma.norm() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // Phase-align column q so the Gram cross term is real,
                // then apply a real Jacobi rotation to the aligned pair.
                let phase = gamma / gamma.norm();
                let g = gamma.norm();
                let tau = (beta - alpha) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, phase, c, s);
                rotate_pair(&mut v, p, q, phase, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| column_norm(&w, j)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut u = ComplexMatrix::zeros(n, n);
    let mut sigma = vec![0.0; n];
    let mut vv = ComplexMatrix::zeros(n, n);
    let rank_eps = norms.iter().fold(0.0f64, |a, &b| a.max(b)) * n as f64 * f64::EPSILON;
    let mut deficient = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        for i in 0..n {
            vv[(i, dst)] = v[(i, src)];
        }
        if norms[src] > rank_eps && norms[src] > 0.0 {
            let inv = 1.0 / norms[src];
            for i in 0..n {
                u[(i, dst)] = w[(i, src)] * inv;
            }
        } else {
            deficient.push(dst);
        }
    }
    for dst in deficient {
        complete_orthonormal_column(&mut u, dst);
    }

    (Svd { u, sigma, v: vv }, converged)
}

/// Adjugate through the SVD: with `M = U Σ V^H`,
///
/// ```text
/// adj(M) = det(M) M^{-1} = det(U V^H) · V diag(γ_i) U^H,   γ_i = Π_{j≠i} σ_j
/// ```
///
/// which stays finite for singular `M`: rank `n−1` leaves exactly one
/// nonzero `γ`, anything lower gives the zero matrix. The arbitrary phase
/// a completed null column of `U` carries cancels between `det(U V^H)` and
/// `U^H`. Total for finite inputs, modulo an unreachable Jacobi sweep cap.
pub fn adjugate(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.rows();
    if n == 0 {
        return ComplexMatrix::zeros(0, 0);
    }
    if n == 1 {
        return ComplexMatrix::identity(1);
    }
    // Use the factor state even if the sweep cap were ever hit: the product
    // U Σ V^H still reproduces M to roundoff at any sweep count.
    let (svd, _) = jacobi_svd(m);
    let Svd { u, sigma, v } = svd;

    // γ_i by prefix/suffix products, avoiding division so zero singular
    // values are handled exactly.
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * sigma[i];
    }
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * sigma[i];
    }

    let det_uv = lu_factor(&u).det() * lu_factor(&v).det().conj();
    let mut adj = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::ZERO;
            for k in 0..n {
                let gamma = prefix[k] * suffix[k + 1];
                if gamma != 0.0 {
                    s += v[(i, k)] * gamma * u[(j, k)].conj();
                }
            }
            adj[(i, j)] = det_uv * s;
        }
    }
    adj
}

fn column_gram(w: &ComplexMatrix, p: usize, q: usize) -> (f64, f64, Complex64) {
    let n = w.rows();
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = Complex64::ZERO;
    for i in 0..n {
        let wp = w[(i, p)];
        let wq = w[(i, q)];
        alpha += wp.norm_sqr();
        beta += wq.norm_sqr();
        gamma += wp.conj() * wq;
    }
    (alpha, beta, gamma)
}

fn column_norm(w: &ComplexMatrix, j: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..w.rows() {
        s += w[(i, j)].norm_sqr();
    }
    s.sqrt()
}

/// Applies the rotation `[w_p, w_q·phase⁻¹] ← [w_p, w_q·phase⁻¹] · [[c, s], [-s, c]]`
/// with the phase folded into column q.
fn rotate_pair(w: &mut ComplexMatrix, p: usize, q: usize, phase: Complex64, c: f64, s: f64) {
    let phase_conj = phase.conj();
    for i in 0..w.rows() {
        let wp = w[(i, p)];
        let wq = w[(i, q)] * phase_conj;
        w[(i, p)] = c * wp - s * wq;
        w[(i, q)] = s * wp + c * wq;
    }
}

/// Replaces column `dst` of `u` (assumed unset) by a unit vector orthogonal
/// to all other nonzero columns: pick the coordinate axis with the largest
/// residual after projection, then orthogonalize twice for stability.
fn complete_orthonormal_column(u: &mut ComplexMatrix, dst: usize) {
    let n = u.rows();
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for axis in 0..n {
        let mut cand = vec![Complex64::ZERO; n];
        cand[axis] = Complex64::ONE;
        for _ in 0..2 {
            for j in 0..n {
                if j == dst {
                    continue;
                }
                let mut proj = Complex64::ZERO;
                for i in 0..n {
                    proj += u[(i, j)].conj() * cand[i];
                }
                if proj != Complex64::ZERO {
                    for i in 0..n {
                        let sub = proj * u[(i, j)];
                        cand[i] -= sub;
                    }
                }
            }
        }
        let norm = cand.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if best.as_ref().is_none_or(|(b, _)| norm > *b) {
            best = Some((norm, cand));
        }
    }
    let (norm, cand) = best.expect("dimension at least one");
    // norm is bounded below by ~1/sqrt(n) for any rank-deficient frame.
    let inv = 1.0 / norm;
    for i in 0..n {
        u[(i, dst)] = cand[i] * inv;
    }
}
