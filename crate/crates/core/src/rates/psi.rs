use super::RateError;
use crate::lyapunov::PhiSpec;
use crate::quadrature::gauss_legendre;
use crate::Real;

/// Table spacing in `w = log u`.
const STEP: f64 = 1.0 / 64.0;

/// `ψ = 1/(φ ∘ H_φ⁻¹)` with `H_φ(u) = ∫₁ᵘ ds/φ(s)`, tabulated in `w = log u`.
#[derive(Debug, Clone)]
pub struct PsiProfile<T> {
    phi: PhiSpec<T>,
    /// `H_φ(e^{k·STEP})`
    h: Vec<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> PsiProfile<T> {
    pub fn new(phi: PhiSpec<T>) -> Result<Self, RateError> {
        phi.check_positive().map_err(|e| RateError::InvalidInput(e.to_string()))?;
        let (nodes, weights) = gauss_legendre::<T>(8);
        let w_max = T::max_value().ln() * T::lit(0.9);
        let step = T::lit(STEP);
        let mut prof = PsiProfile {
            phi,
            h: vec![T::zero()],
            nodes,
            weights,
        };
        let mut k = 0usize;
        loop {
            let w0 = step * T::from_usize_lossy(k);
            let w1 = w0 + step;
            if w1 > w_max {
                break;
            }
            let part = prof.piece(w0, w1);
            if !part.is_finite() {
                break;
            }
            let last = *prof.h.last().unwrap();
            prof.h.push(last + part);
            k += 1;
            // stop once H is flat to rounding (bounded H) or past any sensible t
            if part <= last * T::epsilon() || last + part > T::lit(1e12) {
                break;
            }
        }
        Ok(prof)
    }

    /// `∫_{w0}^{w1} e^w/φ(e^w) dw`
    fn piece(&self, w0: T, w1: T) -> T {
        let half = (w1 - w0) * T::lit(0.5);
        let mid = w0 + half;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &wt)| {
                let u = (mid + half * x).exp();
                wt * half * u / self.phi.eval(u)
            })
            .sum()
    }

    pub fn phi(&self) -> &PhiSpec<T> {
        &self.phi
    }

    /// Largest `H_φ` reached by the table; `ψ(t)` is undefined beyond it when `H_φ` is bounded.
    pub fn h_sup(&self) -> T {
        *self.h.last().unwrap()
    }

    pub fn h(&self, u: T) -> Result<T, RateError> {
        if !(u >= T::one()) {
            return Err(RateError::InvalidInput(format!("H_phi needs u >= 1, got {u}")));
        }
        let w = u.ln();
        let step = T::lit(STEP);
        let k = (w / step).floor().to_usize().unwrap_or(usize::MAX);
        if k + 1 >= self.h.len() {
            return Err(RateError::InvalidInput(format!("u = {u} beyond the tabulated range")));
        }
        let w0 = step * T::from_usize_lossy(k);
        Ok(self.h[k] + self.piece(w0, w))
    }

    /// `H_φ⁻¹(t)`
    pub fn h_inverse(&self, t: T) -> Result<T, RateError> {
        if !(t >= T::zero()) {
            return Err(RateError::InvalidInput(format!("t = {t} must be >= 0")));
        }
        let k = self.h.partition_point(|h| *h <= t);
        if k >= self.h.len() {
            return Err(RateError::Unbounded {
                what: "H_phi".into(),
                sup: self.h_sup().f64(),
            });
        }
        let k = k - 1;
        let step = T::lit(STEP);
        let (mut lo, mut hi) = (step * T::from_usize_lossy(k), step * T::from_usize_lossy(k + 1));
        let base = self.h[k];
        for _ in 0..100 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid == lo || mid == hi {
                break;
            }
            if base + self.piece(step * T::from_usize_lossy(k), mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(((lo + hi) * T::lit(0.5)).exp())
    }

    pub fn psi(&self, t: T) -> Result<T, RateError> {
        Ok(T::one() / self.phi.eval(self.h_inverse(t)?))
    }
}

/// One-shot `ψ(t)`; build a [`PsiProfile`] when evaluating many `t`.
pub fn psi_from_phi<T: Real>(phi: &PhiSpec<T>, t: T) -> Result<T, RateError> {
    PsiProfile::new(phi.clone())?.psi(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let lin = PsiProfile::new(PhiSpec::linear(1.0f64)).unwrap();
        assert!((lin.psi(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-9);
        assert!((lin.psi(0.0).unwrap() - 1.0).abs() < 1e-12);
        let sq = PsiProfile::new(PhiSpec::<f64>::general("u^0.5").unwrap()).unwrap();
        assert!((sq.psi(2.0).unwrap() - 0.5).abs() < 1e-9);
        for t in [0.0, 0.3, 7.0, 40.0] {
            assert!((sq.psi(t).unwrap() - 1.0 / (1.0 + t / 2.0)).abs() < 1e-9);
        }
        let rho = 0.7;
        let p = PsiProfile::new(PhiSpec::linear(rho)).unwrap();
        for i in 0..=100 {
            let t = i as f64 / 10.0;
            assert!((p.psi(t).unwrap() * rho * (rho * t).exp() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bounded_h_is_reported() {
        // φ = u²: H = 1 − 1/u < 1
        let p = PsiProfile::new(PhiSpec::<f64>::general("u^2").unwrap()).unwrap();
        assert!((p.h_sup() - 1.0).abs() < 1e-6);
        assert!((p.psi(0.5).unwrap() - 0.25).abs() < 1e-9);
        assert!(matches!(p.psi(2.0), Err(RateError::Unbounded { .. })));
    }

    #[test]
    fn psi_is_non_increasing() {
        let p = PsiProfile::new(PhiSpec::log_power(1.0f64, 2.0)).unwrap();
        let vals: Vec<f64> = (0..50).map(|i| p.psi(10f64.powf(-2.0 + 5.0 * i as f64 / 49.0)).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(vals.iter().all(|v| *v > 0.0));
    }
}
