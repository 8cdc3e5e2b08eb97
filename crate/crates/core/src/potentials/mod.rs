//! Potentials `F` and their Gibbs measures `μ ∝ e^{-2F}`.

mod measure;
mod sampling;

pub use measure::{Domain, GibbsMeasure, MeasureError};
pub use sampling::{ks_statistic, sample_1d};

use std::fmt;

use crate::error::{pt, EvalError};
use crate::expr::{Expr, ExprError};
use crate::jet::Jet;
use crate::Real;

/// Default smoothing scale for `|x|^p` at the origin.
pub const DEFAULT_DELTA: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialForm<T> {
    /// `((δ² + |x|²)^{1/2})^p`
    Power { p: T, delta: T },
    /// `((d + p)/2) log(1 + |x|)`
    HeavyTail { p: T },
    /// `κ|x|²/2`; `κ = 0` is the Lebesgue case.
    Quadratic { kappa: T },
    /// `base^exponent`, defined where `base > 0`.
    Powered { base: Box<Potential<T>>, exponent: T },
    /// `|v|²/2 + F(x)` on `(x, v)`, so that `e^{-2·}` is the kinetic invariant density.
    PhaseSpace { position: Box<Potential<T>> },
    Custom(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Potential<T> {
    dim: usize,
    form: PotentialForm<T>,
}

impl<T: Real> Potential<T> {
    pub fn power(dim: usize, p: T, delta: T) -> Self {
        assert!(dim >= 1 && p > T::zero() && delta >= T::zero());
        Potential {
            dim,
            form: PotentialForm::Power { p, delta },
        }
    }

    pub fn heavy_tail(dim: usize, p: T) -> Self {
        assert!(dim >= 1 && p > T::zero());
        Potential {
            dim,
            form: PotentialForm::HeavyTail { p },
        }
    }

    pub fn quadratic(dim: usize, kappa: T) -> Self {
        assert!(dim >= 1 && kappa >= T::zero());
        Potential {
            dim,
            form: PotentialForm::Quadratic { kappa },
        }
    }

    pub fn powered(base: Potential<T>, exponent: T) -> Self {
        Potential {
            dim: base.dim,
            form: PotentialForm::Powered {
                base: Box::new(base),
                exponent,
            },
        }
    }

    pub fn phase_space(position: Potential<T>) -> Self {
        Potential {
            dim: 2 * position.dim,
            form: PotentialForm::PhaseSpace {
                position: Box::new(position),
            },
        }
    }

    pub fn custom(dim: usize, expr: Expr) -> Self {
        assert!(expr.arity() <= dim);
        Potential {
            dim,
            form: PotentialForm::Custom(expr),
        }
    }

    /// Parses an expression over `x1..xd`.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        Ok(Self::custom(dim, Expr::parse_indexed(text, dim)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> &PotentialForm<T> {
        &self.form
    }

    pub fn is_custom(&self) -> bool {
        matches!(self.form, PotentialForm::Custom(_))
    }

    fn check_dim(&self, x: &[T]) -> Result<(), EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Radial profile `F = g(|x|)` for the rotation-invariant builtins.
    pub fn radial_value(&self, r: T) -> Option<T> {
        match &self.form {
            PotentialForm::Power { p, delta } => Some((*delta * *delta + r * r).sqrt().powf(*p)),
            PotentialForm::HeavyTail { p } => Some(self.heavy_k(*p) * r.ln_1p()),
            PotentialForm::Quadratic { kappa } => Some(*kappa * r * r * T::lit(0.5)),
            PotentialForm::Powered { base, exponent } => {
                base.radial_value(r).map(|v| v.powf(*exponent))
            }
            _ => None,
        }
    }

    fn heavy_k(&self, p: T) -> T {
        (T::from_usize_lossy(self.dim) + p) * T::lit(0.5)
    }

    pub fn value(&self, x: &[T]) -> Result<T, EvalError> {
        self.check_dim(x)?;
        let v = match &self.form {
            PotentialForm::PhaseSpace { position } => {
                let d = position.dim;
                let kin: T = x[d..].iter().map(|v| *v * *v).sum();
                position.value(&x[..d])? + kin * T::lit(0.5)
            }
            PotentialForm::Custom(e) => e.eval(x),
            PotentialForm::Powered { base, exponent } => {
                let b = base.value(x)?;
                if b <= T::zero() {
                    return Err(EvalError::OutOfDomain {
                        point: pt(x),
                        what: "a power of a non-positive potential".into(),
                    });
                }
                b.powf(*exponent)
            }
            _ => {
                let r = norm(x);
                self.radial_value(r).expect("radial builtin")
            }
        };
        if !v.is_finite() {
            return Err(EvalError::NonFinite {
                point: pt(x),
                what: "F".into(),
            });
        }
        Ok(v)
    }

    pub fn jet(&self, x: &[T]) -> Result<Jet<T>, EvalError> {
        self.check_dim(x)?;
        let d = self.dim;
        match &self.form {
            PotentialForm::Quadratic { kappa } => {
                let mut hess = vec![T::zero(); d * d];
                for i in 0..d {
                    hess[i * d + i] = *kappa;
                }
                Ok(Jet {
                    value: *kappa * x.iter().map(|v| *v * *v).sum::<T>() * T::lit(0.5),
                    grad: x.iter().map(|v| *kappa * *v).collect(),
                    hess,
                })
            }
            PotentialForm::Power { p, delta } => {
                let s = (*delta * *delta + x.iter().map(|v| *v * *v).sum::<T>()).sqrt();
                if s == T::zero() {
                    return Err(EvalError::SingularPoint {
                        point: pt(x),
                        what: "Power potential with delta = 0 at the origin".into(),
                    });
                }
                let g = s.powf(*p);
                let g1 = *p * s.powf(*p - T::one());
                let g2 = *p * (*p - T::one()) * s.powf(*p - T::lit(2.0));
                Ok(smoothed_radial_jet(x, s, g, g1, g2))
            }
            PotentialForm::HeavyTail { p } => {
                let r = norm(x);
                if r == T::zero() {
                    return Err(EvalError::SingularPoint {
                        point: pt(x),
                        what: "HeavyTail potential at the origin".into(),
                    });
                }
                let k = self.heavy_k(*p);
                let g = k * r.ln_1p();
                let g1 = k / (T::one() + r);
                let g2 = -k / ((T::one() + r) * (T::one() + r));
                Ok(smoothed_radial_jet(x, r, g, g1, g2))
            }
            PotentialForm::Powered { base, exponent } => {
                let b = base.jet(x)?;
                if b.value <= T::zero() {
                    return Err(EvalError::OutOfDomain {
                        point: pt(x),
                        what: "a power of a non-positive potential".into(),
                    });
                }
                let e = *exponent;
                let g = b.value.powf(e);
                let g1 = e * b.value.powf(e - T::one());
                let g2 = e * (e - T::one()) * b.value.powf(e - T::lit(2.0));
                Ok(b.compose(g, g1, g2))
            }
            PotentialForm::PhaseSpace { position } => {
                let dx = position.dim;
                let f = position.jet(&x[..dx])?;
                let mut jet = Jet::constant(T::zero(), d);
                jet.value = f.value + x[dx..].iter().map(|v| *v * *v).sum::<T>() * T::lit(0.5);
                for i in 0..dx {
                    jet.grad[i] = f.grad[i];
                    jet.grad[dx + i] = x[dx + i];
                    jet.hess[(dx + i) * d + dx + i] = T::one();
                    for j in 0..dx {
                        jet.hess[i * d + j] = f.h(i, j);
                    }
                }
                Ok(jet)
            }
            PotentialForm::Custom(e) => {
                let f = |y: &[T]| e.eval(y);
                let jet = finite_difference_jet(&f, x);
                if !jet.value.is_finite()
                    || jet.grad.iter().chain(&jet.hess).any(|v| !v.is_finite())
                {
                    return Err(EvalError::NonFinite {
                        point: pt(x),
                        what: "custom potential or its finite differences".into(),
                    });
                }
                Ok(jet)
            }
        }
    }

    pub fn grad(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
        Ok(self.jet(x)?.grad)
    }

    pub fn hessian(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
        Ok(self.jet(x)?.hess)
    }

    pub fn laplacian(&self, x: &[T]) -> Result<T, EvalError> {
        Ok(self.jet(x)?.laplacian())
    }

    /// Minimum of `F` over the supplied points; errors if any value is not finite.
    pub fn check_bounded_below<'a, I: IntoIterator<Item = &'a [T]>>(
        &self,
        points: I,
    ) -> Result<T, EvalError> {
        let mut lo = T::infinity();
        for x in points {
            lo = lo.min(self.value(x)?);
        }
        Ok(lo)
    }
}

impl<T: Real> fmt::Display for Potential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            PotentialForm::Power { p, delta } => {
                write!(f, "Power(p={p}, delta={delta}, d={})", self.dim)
            }
            PotentialForm::HeavyTail { p } => write!(f, "HeavyTail(p={p}, d={})", self.dim),
            PotentialForm::Quadratic { kappa } => {
                write!(f, "Quadratic(kappa={kappa}, d={})", self.dim)
            }
            PotentialForm::Powered { base, exponent } => write!(f, "({base})^{exponent}"),
            PotentialForm::PhaseSpace { position } => write!(f, "|v|^2/2 + {position}"),
            PotentialForm::Custom(e) => write!(f, "Custom({}, d={})", e.to_text_indexed(), self.dim),
        }
    }
}

pub(crate) fn norm<T: Real>(x: &[T]) -> T {
    x.iter().map(|v| *v * *v).sum::<T>().sqrt()
}

/// Jet of `g(s)` with `s = (δ² + |x|²)^{1/2}` given `g, g', g''` at `s > 0`.
pub(crate) fn smoothed_radial_jet<T: Real>(x: &[T], s: T, g: T, g1: T, g2: T) -> Jet<T> {
    let d = x.len();
    let grad = x.iter().map(|&v| g1 * v / s).collect();
    let mut hess = vec![T::zero(); d * d];
    let a = g1 / s;
    let b = (g2 - g1 / s) / (s * s);
    for i in 0..d {
        for j in 0..d {
            hess[i * d + j] = b * x[i] * x[j] + if i == j { a } else { T::zero() };
        }
    }
    Jet {
        value: g,
        grad,
        hess,
    }
}

/// Central differences: gradient step `ε^{1/3}·max(1,|x_i|)`, Hessian step `ε^{1/4}·max(1,|x_i|)`.
pub fn finite_difference_jet<T: Real, F: Fn(&[T]) -> T>(f: &F, x: &[T]) -> Jet<T> {
    let d = x.len();
    let eps = T::epsilon();
    let h1: Vec<T> = x.iter().map(|v| eps.cbrt() * v.abs().max(T::one())).collect();
    let h2: Vec<T> = x.iter().map(|v| eps.sqrt().sqrt() * v.abs().max(T::one())).collect();
    let f0 = f(x);
    let mut y = x.to_vec();
    let at = |y: &mut Vec<T>, moves: &[(usize, T)]| {
        for &(i, h) in moves {
            y[i] += h;
        }
        let v = f(y);
        y.copy_from_slice(x);
        v
    };
    let two = T::lit(2.0);
    let mut grad = vec![T::zero(); d];
    let mut hess = vec![T::zero(); d * d];
    for i in 0..d {
        let (hp, hm) = (at(&mut y, &[(i, h1[i])]), at(&mut y, &[(i, -h1[i])]));
        grad[i] = (hp - hm) / (two * h1[i]);
        let h = h2[i];
        let (p, m) = (at(&mut y, &[(i, h)]), at(&mut y, &[(i, -h)]));
        hess[i * d + i] = (p - two * f0 + m) / (h * h);
        for j in 0..i {
            let k = h2[j];
            let pp = at(&mut y, &[(i, h), (j, k)]);
            let pm = at(&mut y, &[(i, h), (j, -k)]);
            let mp = at(&mut y, &[(i, -h), (j, k)]);
            let mm = at(&mut y, &[(i, -h), (j, -k)]);
            let v = (pp - pm - mp + mm) / (T::lit(4.0) * h * k);
            hess[i * d + j] = v;
            hess[j * d + i] = v;
        }
    }
    Jet {
        value: f0,
        grad,
        hess,
    }
}
