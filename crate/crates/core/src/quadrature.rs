//! One-dimensional quadrature rules.

use crate::scalar::sum_compensated;
use crate::Real;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (
        x.into_iter().map(T::lit).collect(),
        w.into_iter().map(T::lit).collect(),
    )
}

/// Composite Simpson weights for `n` (odd) equispaced nodes with spacing `h`,
/// falling back to the trapezoid rule when `n` is even.
pub fn simpson_weights<T: Real>(n: usize, h: T) -> Vec<T> {
    if n < 2 {
        return vec![T::zero(); n];
    }
    if n.is_multiple_of(2) || n < 3 {
        let mut w = vec![h; n];
        w[0] = h * T::lit(0.5);
        w[n - 1] = h * T::lit(0.5);
        return w;
    }
    let third = h / T::lit(3.0);
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                third
            } else if i % 2 == 1 {
                third * T::lit(4.0)
            } else {
                third * T::lit(2.0)
            }
        })
        .collect()
}

/// Integrates `f` over `[a, b]` with `panels` Gauss–Legendre panels of `order` points.
pub fn gl_composite<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, panels: usize, order: usize) -> T {
    let (x, w) = gauss_legendre::<T>(order);
    let width = (b - a) / T::from_usize_lossy(panels);
    let half = width * T::lit(0.5);
    sum_compensated((0..panels).flat_map(|k| {
        let mid = a + width * (T::from_usize_lossy(k) + T::lit(0.5));
        x.iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * half * f(mid + half * xi))
            .collect::<Vec<_>>()
    }))
}

/// Nodes and weights of a geometrically graded Gauss–Legendre rule on `[a, ∞)`.
///
/// Panel `k` covers `[a + s(2^k - 1), a + s(2^{k+1} - 1)]`.
pub fn graded_tail_rule<T: Real>(a: T, scale: T, panels: usize, order: usize) -> (Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(order);
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    let mut lo = a;
    let mut width = scale;
    for _ in 0..panels {
        let half = width * T::lit(0.5);
        let mid = lo + half;
        for (&xi, &wi) in x.iter().zip(&w) {
            nodes.push(mid + half * xi);
            weights.push(wi * half);
        }
        lo += width;
        width *= T::lit(2.0);
    }
    (nodes, weights)
}

/// `∫_a^∞ f` on doubling panels until contributions fall below `rel_tol` of the running total.
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> T>(f: F, a: T, scale: T, rel_tol: T) -> T {
    let (x, w) = gauss_legendre::<T>(16);
    let mut total = T::zero();
    let mut lo = a;
    let mut width = scale;
    let mut small = 0;
    for _ in 0..400 {
        let half = width * T::lit(0.5);
        let mid = lo + half;
        let part = sum_compensated(x.iter().zip(&w).map(|(&xi, &wi)| wi * half * f(mid + half * xi)));
        total += part;
        if part.abs() <= rel_tol * total.abs() {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
        lo += width;
        width *= T::lit(2.0);
        if !lo.is_finite() {
            break;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let (x, w) = gauss_legendre::<f64>(8);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
        let (x1, w1) = gauss_legendre::<f64>(1);
        assert!(x1[0].abs() < 1e-15 && (w1[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_integrates_cubics() {
        let n = 11;
        let h = 0.1;
        let w = simpson_weights(n, h);
        let s: f64 = (0..n).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
        assert!((s - 0.25).abs() < 1e-14);
    }

    #[test]
    fn tail_integrals() {
        let exp_tail = integrate_to_infinity(|x: f64| (-2.0 * x).exp(), 1.0, 1.0, 1e-16);
        assert!((exp_tail - 0.5 * (-2.0f64).exp()).abs() < 1e-15);
        let power_tail = integrate_to_infinity(|x: f64| (1.0 + x).powf(-1.5), 10.0, 1.0, 1e-14);
        assert!((power_tail / (2.0 / 11f64.sqrt()) - 1.0).abs() < 1e-10);
        let (n, w) = graded_tail_rule(0.0f64, 0.5, 40, 16);
        let s: f64 = n.iter().zip(&w).map(|(x, w)| w * (-x).exp()).sum();
        assert!((s - 1.0).abs() < 1e-13);
    }
}
