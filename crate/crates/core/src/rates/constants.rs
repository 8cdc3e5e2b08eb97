use super::RateError;
use crate::lyapunov::{DriftCertificate, PhiSpec};
use crate::Real;

/// Which of the two variants of the Lyapunov-Poincaré constant applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantCase {
    /// Needs `α·μ(U) > b·μ(Uᶜ)` (or `R·μ(U) > b·μ(Uᶜ)` for `C_w`).
    One,
    /// Needs `U ⊇ {V ≤ b/α}` (or `U ⊇ {φ(V) ≤ b}`); the caller states whether it holds.
    Two { contains_sublevel: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantResult<T> {
    pub lambda: T,
    pub constant: T,
    pub case: ConstantCase,
}

/// Drift constants in the form `LV ≤ −2αV + b·1_C` from a certificate `LV ≤ −αV + b·1_C`.
pub fn halved_linear<T: Real>(cert: &DriftCertificate<T>) -> Result<(T, T), RateError> {
    match cert.phi {
        PhiSpec::Linear(a) => Ok((a * T::lit(0.5), cert.b)),
        _ => Err(RateError::InvalidInput("certificate phi is not linear".into())),
    }
}

/// `φ/2` and `b` for a certificate `LV ≤ −φ(V) + b·1_C`.
pub fn halved_phi<T: Real>(cert: &DriftCertificate<T>) -> (PhiSpec<T>, T) {
    (cert.phi.scaled(T::lit(0.5)), cert.b)
}

fn lambda_of<T: Real>(b: T, kappa_u: T) -> T {
    (b * kappa_u - T::one()).max(T::zero())
}

fn check_unit<T: Real>(mu_u: T) -> Result<(), RateError> {
    if !(mu_u > T::zero() && mu_u <= T::one()) {
        return Err(RateError::InvalidInput(format!("mu(U) = {mu_u} must lie in (0, 1]")));
    }
    Ok(())
}

/// `(λ, C_LP)` for the drift `LV ≤ −2αV + b·1_C` and a local Poincaré constant `κ_U`.
pub fn clp<T: Real>(alpha: T, b: T, kappa_u: T, mu_u: T, case: ConstantCase) -> Result<ConstantResult<T>, RateError> {
    check_unit(mu_u)?;
    if !(alpha > T::zero() && b >= T::zero() && kappa_u >= T::zero()) {
        return Err(RateError::InvalidInput("need alpha > 0, b >= 0, kappa_U >= 0".into()));
    }
    let mu_c = T::one() - mu_u;
    let lambda = lambda_of(b, kappa_u);
    let inv = match case {
        ConstantCase::One => {
            if !(alpha * mu_u > b * mu_c) {
                return Err(RateError::Precondition(format!(
                    "alpha mu(U) > b mu(U^c) fails: {} <= {}",
                    alpha * mu_u,
                    b * mu_c
                )));
            }
            alpha * (T::one() - b * mu_c / (alpha * mu_u)) / (T::one() + lambda)
        }
        ConstantCase::Two { contains_sublevel } => {
            if !contains_sublevel {
                return Err(RateError::Precondition("U contains {V <= b/alpha} fails".into()));
            }
            if !(mu_u > mu_c) {
                return Err(RateError::Precondition(format!("mu(U) > mu(U^c) fails: {mu_u} <= {mu_c}")));
            }
            alpha * (T::one() - mu_c / mu_u) / (T::one() + lambda)
        }
    };
    Ok(ConstantResult {
        lambda,
        constant: T::one() / inv,
        case,
    })
}

/// `(λ, C_w)` for the drift `LV ≤ −2φ(V) + b·1_C`.
pub fn cw<T: Real>(
    phi: &PhiSpec<T>,
    b: T,
    kappa_u: T,
    mu_u: T,
    case: ConstantCase,
) -> Result<ConstantResult<T>, RateError> {
    check_unit(mu_u)?;
    if !(b >= T::zero() && kappa_u >= T::zero()) {
        return Err(RateError::InvalidInput("need b >= 0, kappa_U >= 0".into()));
    }
    let mu_c = T::one() - mu_u;
    let lambda = lambda_of(b, kappa_u);
    let r = match case {
        ConstantCase::One => {
            let r = phi.lower_bound();
            if !(r * mu_u > b * mu_c) {
                return Err(RateError::Precondition(format!(
                    "R mu(U) > b mu(U^c) fails: {} <= {}",
                    r * mu_u,
                    b * mu_c
                )));
            }
            r
        }
        ConstantCase::Two { contains_sublevel } => {
            if !phi.is_increasing() {
                return Err(RateError::Precondition("phi increasing fails".into()));
            }
            if !contains_sublevel {
                return Err(RateError::Precondition("U contains {phi(V) <= b} fails".into()));
            }
            let r = phi.eval(b);
            if !(r * mu_u > b * mu_c) {
                return Err(RateError::Precondition(format!(
                    "phi(b) mu(U) > b mu(U^c) fails: {} <= {}",
                    r * mu_u,
                    b * mu_c
                )));
            }
            r
        }
    };
    let inv = (T::one() - b * mu_c / (r * mu_u)) / (T::one() + lambda);
    Ok(ConstantResult {
        lambda,
        constant: T::one() / inv,
        case,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clp_examples() {
        let r = clp(1.0f64, 1.0, 1.0, 0.9, ConstantCase::One).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!((r.constant - 1.125).abs() < 1e-14);
        let full = clp(0.5f64, 3.0, 2.0, 1.0, ConstantCase::One).unwrap();
        assert!((full.constant - (1.0 + 5.0) / 0.5).abs() < 1e-12);
        assert_eq!(clp(1.0f64, 0.5, 1.5, 0.9, ConstantCase::One).unwrap().lambda, 0.0);
        match clp(1.0f64, 10.0, 1.0, 0.9, ConstantCase::One) {
            Err(RateError::Precondition(m)) => assert!(m.contains("alpha mu(U) > b mu(U^c)")),
            other => panic!("{other:?}"),
        }
        let two = clp(1.0f64, 10.0, 0.0, 0.9, ConstantCase::Two { contains_sublevel: true }).unwrap();
        assert!((two.constant - 1.0 / (1.0 - 0.1 / 0.9)).abs() < 1e-12);
        assert!(clp(1.0f64, 10.0, 0.0, 0.9, ConstantCase::Two { contains_sublevel: false }).is_err());
    }

    #[test]
    fn cw_examples() {
        let phi = PhiSpec::linear(1.0f64);
        let r = cw(&phi, 0.5, 1.0, 0.95, ConstantCase::One).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert!((1.0 / r.constant - (1.0 - 0.5 * 0.05 / 0.95)).abs() < 1e-12);
        assert!((1.0 / r.constant - 0.97368).abs() < 1e-5);
        let deg = cw(&phi, 3.0, 1.0, 1.0, ConstantCase::One).unwrap();
        assert!((deg.constant - 3.0).abs() < 1e-12);
        // linear φ = α u: C_w·α agrees with C_LP in case (1)
        let alpha = 0.8f64;
        let w = cw(&PhiSpec::linear(alpha), 0.4, 1.0, 0.9, ConstantCase::One).unwrap();
        let l = clp(alpha, 0.4, 1.0, 0.9, ConstantCase::One).unwrap();
        assert!((w.constant / alpha - l.constant).abs() < 1e-12);
        assert!(cw(&PhiSpec::general("u^(-1)").unwrap(), 0.4, 1.0, 0.9, ConstantCase::Two { contains_sublevel: true }).is_err());
    }
}
