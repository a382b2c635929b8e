//! Dense symmetric positive-definite helpers for the small (D <= ~16)
//! matrices the classifier works with. Matrices are row-major `d * d`.

use crate::Scalar;

/// Lower Cholesky factor of `a`, or `None` when `a` is not positive definite.
pub(crate) fn cholesky<T: Scalar>(a: &[T], d: usize) -> Option<Vec<T>> {
    debug_assert_eq!(a.len(), d * d);
    let mut l = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum = sum - l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return None;
                }
                l[i * d + i] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` in place for lower-triangular `l`.
#[inline]
pub(crate) fn forward_solve<T: Scalar>(l: &[T], d: usize, b: &mut [T]) {
    for i in 0..d {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i * d + k] * b[k];
        }
        b[i] = sum / l[i * d + i];
    }
}

/// `sum(log L_ii)`, i.e. half the log determinant of `L L^T`.
pub(crate) fn half_log_det<T: Scalar>(l: &[T], d: usize) -> T {
    (0..d).map(|i| l[i * d + i].ln()).sum()
}

/// Squared Mahalanobis norm `(x - mu)^T (L L^T)^{-1} (x - mu)`, using
/// `scratch` (length `d`) as workspace.
#[inline]
pub(crate) fn mahalanobis_sq<T: Scalar>(l: &[T], d: usize, x: &[T], mu: &[T], scratch: &mut [T]) -> T {
    for i in 0..d {
        scratch[i] = x[i] - mu[i];
    }
    forward_solve(l, d, scratch);
    scratch[..d].iter().map(|&v| v * v).sum()
}
