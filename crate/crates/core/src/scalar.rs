//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the library is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated (Neumaier) summation.
pub fn sum_compensated<T: Real, I: IntoIterator<Item = T>>(items: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in items {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `n` evenly spaced points covering `[lo, hi]` inclusive.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) * T::lit(0.5)],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(n - 1);
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        lo + step * T::from_usize_lossy(i)
                    }
                })
                .collect()
        }
    }
}

/// Midpoints of `n` equal cells partitioning `[lo, hi]`.
pub fn cell_centres<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let h = (hi - lo) / T::from_usize_lossy(n);
    (0..n)
        .map(|i| lo + h * (T::from_usize_lossy(i) + T::lit(0.5)))
        .collect()
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Option<(T, T)> {
    let w = vec![T::one(); x.len()];
    weighted_linear_fit(x, y, &w).map(|f| (f.intercept, f.slope))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub intercept: T,
    pub slope: T,
    pub slope_se: T,
    pub r_squared: T,
}

/// Weighted least squares line fit. Needs at least three points for a standard error.
pub fn weighted_linear_fit<T: Real>(x: &[T], y: &[T], w: &[T]) -> Option<LineFit<T>> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return None;
    }
    let sw = sum_compensated(w.iter().copied());
    if sw <= T::zero() {
        return None;
    }
    let mx = sum_compensated((0..n).map(|i| w[i] * x[i])) / sw;
    let my = sum_compensated((0..n).map(|i| w[i] * y[i])) / sw;
    let sxx = sum_compensated((0..n).map(|i| w[i] * (x[i] - mx) * (x[i] - mx)));
    let sxy = sum_compensated((0..n).map(|i| w[i] * (x[i] - mx) * (y[i] - my)));
    let syy = sum_compensated((0..n).map(|i| w[i] * (y[i] - my) * (y[i] - my)));
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = sum_compensated((0..n).map(|i| {
        let r = y[i] - intercept - slope * x[i];
        w[i] * r * r
    }));
    let r_squared = if syy > T::zero() {
        T::one() - sse / syy
    } else {
        T::one()
    };
    let slope_se = if n > 2 {
        (sse / T::from_usize_lossy(n - 2) / sxx).sqrt()
    } else {
        T::zero()
    };
    Some(LineFit {
        intercept,
        slope,
        slope_se,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let mut v = vec![1.0f64];
        v.extend(std::iter::repeat_n(1e-16, 10_000));
        let s = sum_compensated(v.iter().copied());
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(-1.0f64, 1.0, 5);
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let c = cell_centres(0.0f32, 1.0, 4);
        assert!((c[0] - 0.125).abs() < 1e-7 && (c[3] - 0.875).abs() < 1e-7);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (a, b) = linear_fit(&x, &y).unwrap();
        assert!((a - 3.0).abs() < 1e-12 && (b + 0.5).abs() < 1e-12);
    }
}
