use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use super::{ComplexMatrix, LinalgError};

/// Largest matrix the dense eigensolver accepts. The linearized state
/// matrix of an FDN has dimension equal to the full system order, so this
/// caps the oracle path, not the solver proper.
pub const MAX_EIGEN_DIM: usize = 512;

/// All eigenvalues of a square complex matrix, in no particular order.
///
/// Balancing, unitary Hessenberg reduction, then an explicit single-shift
/// QR iteration with Wilkinson shifts. Intended for oracle-scale matrices
/// (`dim ≤ 512`); larger requests are refused rather than silently slow.
pub fn eigenvalues_dense(m: &ComplexMatrix) -> Result<Vec<Complex64>, LinalgError> {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    let n = m.rows();
    if n > MAX_EIGEN_DIM {
        return Err(LinalgError::DimensionTooLarge {
            dim: n,
            max: MAX_EIGEN_DIM,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let mut h = m.clone();
    balance(&mut h);
    hessenberg(&mut h);
    qr_eigenvalues(h)
}

/// Parlett-Reinsch balancing: diagonal similarity with radix-2 scale
/// factors until row and column norms are within a factor of two. Leaves
/// eigenvalues unchanged, improves the accuracy of the QR sweep for badly
/// scaled inputs such as companion matrices.
fn balance(a: &mut ComplexMatrix) {
    let n = a.rows();
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].norm();
                    r += a[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 || !(c.is_finite() && r.is_finite()) {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r) < 0.95 * s && f != 1.0 {
                converged = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Unitary reduction to upper Hessenberg form by complex Householder
/// reflectors applied as a similarity.
fn hessenberg(a: &mut ComplexMatrix) {
    let n = a.rows();
    let mut v = vec![Complex64::ZERO; n];
    for k in 0..n.saturating_sub(2) {
        // Reflector for the column below the subdiagonal.
        let mut norm_sqr = 0.0;
        for i in k + 1..n {
            norm_sqr += a[(i, k)].norm_sqr();
        }
        let norm = norm_sqr.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let sign = if x0 == Complex64::ZERO {
            Complex64::ONE
        } else {
            x0 / x0.norm()
        };
        let alpha = -sign * norm;
        // v = x − α e₁, normalized so the reflector is I − 2 v v^H / (v^H v).
        let mut vnorm_sqr = 0.0;
        for i in k + 1..n {
            let vi = if i == k + 1 { a[(i, k)] - alpha } else { a[(i, k)] };
            v[i] = vi;
            vnorm_sqr += vi.norm_sqr();
        }
        if vnorm_sqr == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sqr;
        // Left application: rows k+1.. of columns k..n.
        for j in k..n {
            let mut dot = Complex64::ZERO;
            for i in k + 1..n {
                dot += v[i].conj() * a[(i, j)];
            }
            dot *= tau;
            for i in k + 1..n {
                let sub = v[i] * dot;
                a[(i, j)] -= sub;
            }
        }
        // Right application: columns k+1.. of all rows.
        for i in 0..n {
            let mut dot = Complex64::ZERO;
            for j in k + 1..n {
                dot += a[(i, j)] * v[j];
            }
            dot *= tau;
            for j in k + 1..n {
                let sub = dot * v[j].conj();
                a[(i, j)] -= sub;
            }
        }
        // Entries below the subdiagonal are now zero by construction.
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = Complex64::ZERO;
        }
    }
}

/// Explicit single-shift QR on an upper Hessenberg matrix.
fn qr_eigenvalues(mut h: ComplexMatrix) -> Result<Vec<Complex64>, LinalgError> {
    let n = h.rows();
    let mut eigs = vec![Complex64::ZERO; n];
    let mut hi = n - 1;
    let mut stall = 0usize;
    let mut total_steps = 0usize;
    let max_steps = 60 * n;
    // Givens coefficients per column of the active window.
    let mut rot = vec![(0.0f64, Complex64::ZERO); n];

    loop {
        // Deflate converged subdiagonals.
        while hi > 0 {
            let sub = h[(hi, hi - 1)].norm();
            let local = h[(hi - 1, hi - 1)].norm() + h[(hi, hi)].norm();
            if sub <= f64::EPSILON * local.max(f64::MIN_POSITIVE) {
                h[(hi, hi - 1)] = Complex64::ZERO;
                eigs[hi] = h[(hi, hi)];
                hi -= 1;
                stall = 0;
            } else {
                break;
            }
        }
        if hi == 0 {
            eigs[0] = h[(0, 0)];
            return Ok(eigs);
        }
        // Find the window start: the nearest zero subdiagonal above hi.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let local = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if sub <= f64::EPSILON * local.max(f64::MIN_POSITIVE) {
                h[(lo, lo - 1)] = Complex64::ZERO;
                break;
            }
            lo -= 1;
        }

        if total_steps >= max_steps {
            return Err(LinalgError::NoConvergence {
                iterations: total_steps,
            });
        }
        total_steps += 1;
        stall += 1;

        // Wilkinson shift from the trailing 2x2, with an exceptional shift
        // every 12 stalled steps to break symmetry cycles.
        let shift = if stall % 12 == 0 {
            let mag = h[(hi, hi - 1)].norm() + if hi >= 2 { h[(hi - 1, hi - 2)].norm() } else { 0.0 };
            h[(hi, hi)] + Complex64::new(0.75 * mag, 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };

        // Explicit QR step on the window [lo, hi]: factor H − μI with a
        // Givens chain, then reassemble as RQ + μI.
        for i in lo..=hi {
            h[(i, i)] -= shift;
        }
        for k in lo..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            rot[k] = (c, s);
            for j in k..=hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = c * x + s * y;
                h[(k + 1, j)] = -s.conj() * x + c * y;
            }
        }
        for k in lo..hi {
            let (c, s) = rot[k];
            let top = if k + 1 < hi { k + 2 } else { hi };
            for i in lo..=top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = c * x + s.conj() * y;
                h[(i, k + 1)] = -s * x + c * y;
            }
        }
        for i in lo..=hi {
            h[(i, i)] += shift;
        }
    }
}

/// Eigenvalue of `[[a, b], [c, d]]` closer to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    let e1 = half_tr + disc;
    let e2 = half_tr - disc;
    if (e1 - d).norm() <= (e2 - d).norm() {
        e1
    } else {
        e2
    }
}

/// Complex Givens rotation `[[c, s], [-s̄, c]] [a, b]ᵀ = [r, 0]ᵀ` with real `c`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, Complex64::ZERO);
    }
    if an == 0.0 {
        return (0.0, b.conj() / bn);
    }
    let r = (an * an + bn * bn).sqrt();
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn sort_by_angle(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
        v
    }

    #[test]
    fn diagonal_matrix_returns_its_diagonal() {
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(1.0, 2.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        m[(2, 2)] = Complex64::new(0.0, -3.0);
        let mut eigs = eigenvalues_dense(&m).unwrap();
        eigs.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((eigs[0] - Complex64::new(-0.5, 0.0)).norm() < 1e-14);
        assert!((eigs[1] - Complex64::new(0.0, -3.0)).norm() < 1e-14);
        assert!((eigs[2] - Complex64::new(1.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn circular_shift_matrix_gives_roots_of_unity() {
        // Companion of z^8 − 1; eigenvalues are the 8th roots of unity.
        let n = 8;
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, (i + 1) % n)] = Complex64::ONE;
        }
        let eigs = sort_by_angle(eigenvalues_dense(&m).unwrap());
        for (k, eig) in eigs.iter().enumerate() {
            let angle = 2.0 * core::f64::consts::PI * (k as f64 - 3.0) / n as f64;
            let expect = Complex64::new(angle.cos(), angle.sin());
            assert!(
                (eig - expect).norm() < 1e-10,
                "root {k}: {eig:?} vs {expect:?}"
            );
        }
    }

    #[test]
    fn two_by_two_matches_quadratic_formula() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let mut eigs = eigenvalues_dense(&m).unwrap();
        eigs.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((eigs[0] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((eigs[1] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let m = ComplexMatrix::zeros(513, 513);
        assert!(matches!(
            eigenvalues_dense(&m),
            Err(LinalgError::DimensionTooLarge { dim: 513, max: 512 })
        ));
    }
}
