//! Symmetric tridiagonal eigenvalues by Sturm bisection.

use crate::Real;

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal matrix
/// with diagonal `d` and squared off-diagonal `e2` (`e2[i]` couples `i` and `i + 1`).
pub fn sturm_count<T: Real>(d: &[T], e2: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = d[0] - x;
    if q < T::zero() {
        count += 1;
    }
    for i in 1..d.len() {
        if q.abs() < tiny {
            q = if q < T::zero() { -tiny } else { tiny };
        }
        q = d[i] - x - e2[i - 1] / q;
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn gershgorin<T: Real>(d: &[T], e2: &[T]) -> (T, T) {
    let n = d.len();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for i in 0..n {
        let mut r = T::zero();
        if i > 0 {
            r += e2[i - 1].sqrt();
        }
        if i + 1 < n {
            r += e2[i].sqrt();
        }
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

/// `k`-th smallest eigenvalue (0 based) by bisection to absolute tolerance `tol`.
pub fn kth_eigenvalue<T: Real>(d: &[T], e2: &[T], k: usize, tol: T) -> Option<T> {
    if k >= d.len() {
        return None;
    }
    let (mut lo, mut hi) = gershgorin(d, e2);
    let pad = (hi - lo).abs() * T::lit(1e-12) + T::min_positive_value();
    lo -= pad;
    hi += pad;
    for _ in 0..300 {
        let mid = (lo + hi) * T::lit(0.5);
        if hi - lo <= tol || mid == lo || mid == hi {
            break;
        }
        if sturm_count(d, e2, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some((lo + hi) * T::lit(0.5))
}
