//! Dense symmetric positive-definite solves via Cholesky factorization.
//!
//! The kernel systems solved here are small (one per treatment arm), so a
//! plain row-major factorization is all that is needed.

use alloc::vec;
use alloc::vec::Vec;

/// The matrix was not positive definite (a pivot was zero or negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("matrix is not positive definite")]
pub struct NotPositiveDefinite;

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, n x n).
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>, NotPositiveDefinite> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);

    // Lower-triangular factor L with A = L L^T.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(NotPositiveDefinite);
                }
                l[i * n + j] = libm::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }

    // Forward substitution: L y = b.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }

    // Back substitution: L^T x = y.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_one_by_one() {
        let x = solve_spd(&[4.0], &[2.0], 1).unwrap();
        assert_eq!(x, alloc::vec![0.5]);
    }

    #[test]
    fn solves_known_system() {
        // A = [[4,2],[2,3]], b = [2, 1] -> x = [1/2, 0].
        let x = solve_spd(&[4.0, 2.0, 2.0, 3.0], &[2.0, 1.0], 2).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14);
        assert!(x[1].abs() < 1e-14);
    }

    #[test]
    fn residual_is_small_on_random_spd() {
        use rand_chacha::rand_core::RngCore;
        let mut rng = crate::seed::stream(9, &[]);
        let n = 12;
        // Build A = M M^T + I from pseudo-random M.
        let mut m = alloc::vec![0.0; n * n];
        for v in m.iter_mut() {
            *v = crate::seed::unit_open(&mut rng) - 0.5;
        }
        let mut a = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    s += m[i * n + k] * m[j * n + k];
                }
                a[i * n + j] = s;
            }
        }
        let mut b = alloc::vec![0.0; n];
        for v in b.iter_mut() {
            *v = (rng.next_u64() % 100) as f64 / 10.0 - 5.0;
        }
        let x = solve_spd(&a, &b, n).unwrap();
        for i in 0..n {
            let mut ax = 0.0;
            for j in 0..n {
                ax += a[i * n + j] * x[j];
            }
            assert!((ax - b[i]).abs() < 1e-9, "row {i}: {ax} vs {}", b[i]);
        }
    }

    #[test]
    fn rejects_indefinite() {
        assert_eq!(
            solve_spd(&[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0], 2),
            Err(NotPositiveDefinite)
        );
    }
}
