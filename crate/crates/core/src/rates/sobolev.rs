use crate::Real;

/// `Ψ(u) = (u − 1)²` for `u ≤ 2`, continued for `u > 2` by the unique function with
/// `Ψ'' = 4/u` that is `C¹` at the join:
/// `1 + (2 − 4 log 2)(u − 2) + 4(u log u − u − 2 log 2 + 2)`.
///
/// `Ψ` is convex and vanishes only at `u = 1`. Negative `u` gives NaN.
pub fn psi_sobolev<T: Real>(u: T) -> T {
    if u < T::zero() {
        return T::nan();
    }
    let two = T::lit(2.0);
    if u <= two {
        (u - T::one()) * (u - T::one())
    } else {
        let four = T::lit(4.0);
        let ln2 = T::LN_2();
        T::one() + (two - four * ln2) * (u - two) + four * (u * u.ln() - u - two * ln2 + two)
    }
}

/// `Ψ'(u)`.
pub fn psi_sobolev_d1<T: Real>(u: T) -> T {
    if u < T::zero() {
        return T::nan();
    }
    let two = T::lit(2.0);
    if u <= two {
        two * (u - T::one())
    } else {
        two - T::lit(4.0) * T::LN_2() + T::lit(4.0) * u.ln()
    }
}

/// `Ψ''(u) = 2` for `u ≤ 2`, `4/u` beyond.
pub fn psi_sobolev_d2<T: Real>(u: T) -> T {
    if u < T::zero() {
        return T::nan();
    }
    if u <= T::lit(2.0) {
        T::lit(2.0)
    } else {
        T::lit(4.0) / u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(psi_sobolev(1.0f64), 0.0);
        assert_eq!(psi_sobolev(2.0f64), 1.0);
        assert_eq!(psi_sobolev(0.0f64), 1.0);
        // Ψ(2) + Ψ'(2)(u − 2) + ∫_2^u (u − r) 4/r dr
        let oracle = |u: f64| 1.0 + 2.0 * (u - 2.0) + 4.0 * (u * (u / 2.0).ln() - (u - 2.0));
        for u in [2.5f64, 4.0, 17.0] {
            assert!((psi_sobolev(u) - oracle(u)).abs() < 1e-12 * oracle(u));
        }
        assert!(psi_sobolev(-0.1f64).is_nan());
    }

    #[test]
    fn smooth_join_at_two() {
        let e = 1e-9f64;
        assert!((psi_sobolev(2.0 - e) - psi_sobolev(2.0 + e)).abs() < 1e-8);
        assert!((psi_sobolev_d1(2.0f64) - psi_sobolev_d1(2.0 + 1e-15)).abs() < 1e-12);
        // derivative matches a centred difference away from the join
        for u in [0.5f64, 1.7, 3.0, 10.0] {
            let fd = (psi_sobolev(u + 1e-6) - psi_sobolev(u - 1e-6)) / 2e-6;
            assert!((fd - psi_sobolev_d1(u)).abs() < 1e-6);
            let fd2 = (psi_sobolev_d1(u + 1e-6) - psi_sobolev_d1(u - 1e-6)) / 2e-6;
            assert!((fd2 - psi_sobolev_d2(u)).abs() < 1e-5);
        }
    }

    #[test]
    fn shape() {
        let u: Vec<f64> = (0..1000).map(|i| i as f64 * 0.02).collect();
        let v: Vec<f64> = u.iter().map(|u| psi_sobolev(*u)).collect();
        assert!(v.iter().all(|x| *x >= 0.0));
        for w in v.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
        let ratio: Vec<f64> = u.iter().filter(|u| **u >= 1.0).map(|u| psi_sobolev(*u) / u).collect();
        assert!(ratio.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }
}
