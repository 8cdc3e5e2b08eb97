use std::fmt;

use super::RateError;
use crate::Real;

/// Whether every constant in a bound is computed or an unknown prefactor was set to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Explicitness {
    Explicit,
    /// Shape only: compare exponents and monotonicity, never values.
    Envelope,
}

impl fmt::Display for Explicitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Explicitness::Explicit => "EXPLICIT",
            Explicitness::Envelope => "ENVELOPE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeBound<T> {
    pub formula: &'static str,
    pub inputs: Vec<(&'static str, T)>,
    pub value: T,
    pub flag: Explicitness,
}

/// `inf_K 2ξK² + 8M K^{−2p/q}` with `q = p/(p − 1)`, minimised in closed form.
pub fn lp_truncation_bound<T: Real>(xi_t: T, m_2p: T, p: T) -> Result<EnvelopeBound<T>, RateError> {
    if !(p > T::one() && xi_t >= T::zero() && m_2p >= T::zero()) {
        return Err(RateError::InvalidInput("need p > 1, xi >= 0, M >= 0".into()));
    }
    let inputs = vec![("xi", xi_t), ("M_2p", m_2p), ("p", p)];
    let value = if xi_t == T::zero() || m_2p == T::zero() {
        T::zero()
    } else {
        // y = K²: 2ξ − 8M(p−1) y^{−p} = 0
        let pm1 = p - T::one();
        let y = (T::lit(4.0) * m_2p * pm1 / xi_t).powf(T::one() / p);
        T::lit(2.0) * xi_t * y + T::lit(8.0) * m_2p * y.powf(-pm1)
    };
    Ok(EnvelopeBound {
        formula: "lp_truncation",
        inputs,
        value,
        flag: Explicitness::Explicit,
    })
}

/// `(2 − β)/(1 − β)`
pub fn variance_moment_exponent<T: Real>(beta: T) -> T {
    (T::lit(2.0) - beta) / (T::one() - beta)
}

/// Moments of the initial datum; which ones are needed depends on `β`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments<T> {
    /// `∫|f|V dμ` (variance) or `∫hV dμ` (entropy), used when `β < 1`.
    pub weighted: Option<T>,
    /// `∫|f|^{(2−β)/(1−β)} dμ` or `∫|h−1||log h|^{1/(1−β)} dμ`, used when `β < 1`.
    pub tail: Option<T>,
    /// `∫V dμ`, used when `β = 1`.
    pub integral_v: Option<T>,
    /// `‖f‖_∞` or `‖h‖_∞`, used when `β = 1`.
    pub sup: Option<T>,
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T, RateError> {
    v.ok_or(RateError::MissingMoment(name))
}

fn check_envelope_inputs<T: Real>(psi_t: T, beta: T) -> Result<(), RateError> {
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(RateError::InvalidInput(format!("beta = {beta} must lie in (0, 1]")));
    }
    if !(psi_t >= T::zero()) {
        return Err(RateError::InvalidInput(format!("psi(t) = {psi_t} must be >= 0")));
    }
    Ok(())
}

/// Variance decay envelope with the unknown prefactor set to 1.
pub fn mt_variance_envelope<T: Real>(psi_t: T, beta: T, m: &Moments<T>) -> Result<EnvelopeBound<T>, RateError> {
    check_envelope_inputs(psi_t, beta)?;
    if beta == T::one() {
        let iv = need(m.integral_v, "integral of V")?;
        let s = need(m.sup, "sup norm of f")?;
        return Ok(EnvelopeBound {
            formula: "variance_beta1",
            inputs: vec![("psi", psi_t), ("int_V", iv), ("sup_f", s)],
            value: iv * s * s * psi_t,
            flag: Explicitness::Envelope,
        });
    }
    let w = need(m.weighted, "integral of |f| V")?;
    let q = need(m.tail, "integral of |f|^((2-beta)/(1-beta))")?;
    Ok(EnvelopeBound {
        formula: "variance",
        inputs: vec![("psi", psi_t), ("beta", beta), ("int_fV", w), ("int_f_q", q)],
        value: psi_t.powf(beta) * w.powf(beta) * q.powf(T::one() - beta),
        flag: Explicitness::Envelope,
    })
}

/// Entropy decay envelope with the unknown prefactor set to 1.
pub fn mt_entropy_envelope<T: Real>(psi_t: T, beta: T, m: &Moments<T>) -> Result<EnvelopeBound<T>, RateError> {
    check_envelope_inputs(psi_t, beta)?;
    if beta == T::one() {
        let iv = need(m.integral_v, "integral of V")?;
        let s = need(m.sup, "sup norm of h")?;
        return Ok(EnvelopeBound {
            formula: "entropy_beta1",
            inputs: vec![("psi", psi_t), ("int_V", iv), ("sup_h", s)],
            value: iv * s * s.ln() * psi_t,
            flag: Explicitness::Envelope,
        });
    }
    let w = need(m.weighted, "integral of h V")?;
    let q = need(m.tail, "integral of |h-1| |log h|^(1/(1-beta))")?;
    Ok(EnvelopeBound {
        formula: "entropy",
        inputs: vec![("psi", psi_t), ("beta", beta), ("int_hV", w), ("int_h_log", q)],
        value: psi_t.powf(beta) * w.powf(beta) * q.powf(T::one() - beta),
        flag: Explicitness::Envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_closed_form() {
        let b = lp_truncation_bound(0.01f64, 1.0, 2.0).unwrap();
        assert!((b.value - 0.8).abs() < 1e-10);
        assert_eq!(b.flag, Explicitness::Explicit);
        // brute force over K
        let (xi, m, p) = (0.003f64, 2.5, 3.0);
        let q = p / (p - 1.0);
        let brute = (1..200000)
            .map(|i| {
                let k = i as f64 * 1e-3;
                2.0 * xi * k * k + 8.0 * m * k.powf(-2.0 * p / q)
            })
            .fold(f64::INFINITY, f64::min);
        let got = lp_truncation_bound(xi, m, p).unwrap().value;
        assert!(got <= brute && brute - got < 1e-6 * brute);
        assert!(lp_truncation_bound(1e-30f64, 1.0, 2.0).unwrap().value < 1e-13);
        let mut prev = 0.0;
        for i in 0..50 {
            let v = lp_truncation_bound(1e-4 * (1.0 + i as f64), 1.0, 2.0).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for i in 0..50 {
            let v = lp_truncation_bound(0.01, 0.1 * (1.0 + i as f64), 2.0).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn envelopes() {
        let m = Moments {
            integral_v: Some(2.0f64),
            sup: Some(1.0),
            ..Default::default()
        };
        let t = 1.3f64;
        let e = mt_variance_envelope((-t).exp(), 1.0, &m).unwrap();
        assert!((e.value - 2.0 * (-t).exp()).abs() < 1e-15);
        assert_eq!(e.flag, Explicitness::Envelope);
        assert_eq!(variance_moment_exponent(0.5f64), 3.0);
        assert!(matches!(mt_variance_envelope(0.5f64, 0.5, &m), Err(RateError::MissingMoment(_))));

        let h = Moments {
            integral_v: Some(2.0f64),
            sup: Some(std::f64::consts::E),
            ..Default::default()
        };
        let e = mt_entropy_envelope((-t).exp(), 1.0, &h).unwrap();
        assert!((e.value - 2.0 * std::f64::consts::E * (-t).exp()).abs() < 1e-14);
        let stat = Moments {
            weighted: Some(3.0f64),
            tail: Some(0.0),
            ..Default::default()
        };
        assert_eq!(mt_entropy_envelope(0.5, 0.5, &stat).unwrap().value, 0.0);
        let mom = Moments {
            weighted: Some(3.0f64),
            tail: Some(2.0),
            ..Default::default()
        };
        let v: Vec<f64> = (0..50)
            .map(|i| mt_variance_envelope((-(i as f64) * 0.2).exp(), 0.5, &mom).unwrap().value)
            .collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }
}
