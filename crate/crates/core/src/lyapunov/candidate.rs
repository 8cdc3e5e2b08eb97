use std::fmt;

use super::LyapunovError;
use crate::error::{pt, EvalError};
use crate::expr::Expr;
use crate::generators::Smooth;
use crate::jet::Jet;
use crate::potentials::{finite_difference_jet, norm, smoothed_radial_jet, Potential};
use crate::scalar::linspace;
use crate::Real;

/// Position-space function `G` entering the kinetic functional
/// `Λ_{a,b}(x, v) = a(|v|² + 2F(x)) + b(⟨v, ∇G(x)⟩ + G(x))`.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxG<T> {
    /// `(δ² + |x|²)^{1/2}`, with `‖∇²G‖ = 1/δ` attained at the origin.
    SmoothedNorm { dim: usize, delta: T },
    /// `F^e`, defined where `F > 0`.
    PotentialPower { potential: Potential<T>, exponent: T },
}

impl<T: Real> AuxG<T> {
    pub fn smoothed_norm(dim: usize, delta: T) -> Self {
        AuxG::SmoothedNorm { dim, delta }
    }

    pub fn potential_power(potential: Potential<T>, exponent: T) -> Self {
        AuxG::PotentialPower { potential, exponent }
    }

    pub fn dim(&self) -> usize {
        match self {
            AuxG::SmoothedNorm { dim, .. } => *dim,
            AuxG::PotentialPower { potential, .. } => potential.dim(),
        }
    }

    pub fn jet(&self, x: &[T]) -> Result<Jet<T>, EvalError> {
        match self {
            AuxG::SmoothedNorm { delta, .. } => {
                let s = (*delta * *delta + x.iter().map(|v| *v * *v).sum::<T>()).sqrt();
                if s == T::zero() {
                    return Err(EvalError::SingularPoint {
                        point: pt(x),
                        what: "smoothed norm with delta = 0 at the origin".into(),
                    });
                }
                Ok(smoothed_radial_jet(x, s, s, T::one(), T::zero()))
            }
            AuxG::PotentialPower { potential, exponent } => {
                Potential::powered(potential.clone(), *exponent).jet(x)
            }
        }
    }

    /// `∇³G(x)[v]`, the derivative of the Hessian in direction `v` (row-major).
    pub fn hessian_derivative(&self, x: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        let d = x.len();
        match self {
            AuxG::SmoothedNorm { delta, .. } => {
                let g2 = *delta * *delta + x.iter().map(|y| *y * *y).sum::<T>();
                let g = g2.sqrt();
                let xv: T = x.iter().zip(v).map(|(a, b)| *a * *b).sum();
                let g3 = g2 * g;
                let g5 = g3 * g2;
                let mut out = vec![T::zero(); d * d];
                for i in 0..d {
                    for j in 0..d {
                        let kron = if i == j { xv } else { T::zero() };
                        out[i * d + j] =
                            -(kron + x[i] * v[j] + v[i] * x[j]) / g3 + T::lit(3.0) * x[i] * x[j] * xv / g5;
                    }
                }
                Ok(out)
            }
            AuxG::PotentialPower { .. } => {
                let vn = norm(v);
                if vn == T::zero() {
                    return Ok(vec![T::zero(); d * d]);
                }
                let h = T::epsilon().cbrt() * norm(x).max(T::one()) / vn;
                let shift = |s: T| x.iter().zip(v).map(|(a, b)| *a + s * *b).collect::<Vec<T>>();
                let hp = self.jet(&shift(h))?.hess;
                let hm = self.jet(&shift(-h))?.hess;
                Ok(hp.iter().zip(&hm).map(|(p, m)| (*p - *m) / (T::lit(2.0) * h)).collect())
            }
        }
    }
}

impl<T: Real> fmt::Display for AuxG<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuxG::SmoothedNorm { delta, .. } => write!(f, "sqrt(delta^2+|x|^2), delta={delta}"),
            AuxG::PotentialPower { potential, exponent } => write!(f, "({potential})^{exponent}"),
        }
    }
}

/// Jet of `Λ_{a,b}` on `(x, v)`.
pub fn lambda_jet<T: Real>(
    f: &Potential<T>,
    g: &AuxG<T>,
    a: T,
    b: T,
    z: &[T],
) -> Result<Jet<T>, EvalError> {
    let d = f.dim();
    if z.len() != 2 * d {
        return Err(EvalError::DimensionMismatch {
            expected: 2 * d,
            got: z.len(),
        });
    }
    let (x, v) = z.split_at(d);
    let fj = f.jet(x)?;
    let gj = g.jet(x)?;
    let g3 = g.hessian_derivative(x, v)?;
    let two = T::lit(2.0);
    let n = 2 * d;
    let mut jet = Jet::constant(T::zero(), n);
    let vv: T = v.iter().map(|y| *y * *y).sum();
    let vg: T = v.iter().zip(&gj.grad).map(|(p, q)| *p * *q).sum();
    jet.value = a * (vv + two * fj.value) + b * (vg + gj.value);
    for i in 0..d {
        let hv: T = (0..d).map(|k| gj.h(i, k) * v[k]).sum();
        jet.grad[i] = two * a * fj.grad[i] + b * (hv + gj.grad[i]);
        jet.grad[d + i] = two * a * v[i] + b * gj.grad[i];
        for j in 0..d {
            jet.hess[i * n + j] = two * a * fj.h(i, j) + b * (g3[i * d + j] + gj.h(i, j));
            jet.hess[i * n + d + j] = b * gj.h(i, j);
            jet.hess[(d + j) * n + i] = b * gj.h(i, j);
        }
        jet.hess[(d + i) * n + d + i] = two * a;
    }
    Ok(jet)
}

/// `inf_{x,v} Λ_{a,b}`: the `v`-minimum is explicit, `v* = −b∇G/(2a)`, leaving
/// `min_x 2aF + bG − b²|∇G|²/(4a)` over the cube `[-R, R]^d` with `n` nodes per axis.
pub fn lambda_infimum<T: Real>(
    f: &Potential<T>,
    g: &AuxG<T>,
    a: T,
    b: T,
    half_width: T,
    n: usize,
) -> Result<T, EvalError> {
    let d = f.dim();
    let axis = linspace(-half_width, half_width, n);
    let total = n.pow(d as u32);
    let mut best = T::infinity();
    let mut x = vec![T::zero(); d];
    for k in 0..total {
        let mut r = k;
        for xi in x.iter_mut() {
            *xi = axis[r % n];
            r /= n;
        }
        let gj = g.jet(&x)?;
        let gg: T = gj.grad.iter().map(|y| *y * *y).sum();
        let val = T::lit(2.0) * a * f.value(&x)? + b * gj.value - b * b * gg / (T::lit(4.0) * a);
        best = best.min(val);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LyapunovCandidate<T> {
    /// `e^{aF}`
    ExpPotential { a: T, potential: Potential<T> },
    /// `e^{a|x|^q}` for `|x| ≥ m`; inside, `exp(c₀ + c₁|x|² + c₂|x|⁴)` matched to second order.
    ExpRadial { dim: usize, a: T, q: T, m: T, bridge: [T; 3] },
    /// `(1 + |x|)^a`
    PowerRadial { dim: usize, a: T },
    /// `e^{Λ_{a,b} − inf Λ_{a,b}}`
    KineticExp { potential: Potential<T>, g: AuxG<T>, a: T, b: T, inf_lambda: T },
    /// `Λ_{a,b} + M`
    KineticAffine { potential: Potential<T>, g: AuxG<T>, a: T, b: T, shift: T },
    Custom { dim: usize, expr: Expr },
}

impl<T: Real> LyapunovCandidate<T> {
    pub fn exp_potential(potential: Potential<T>, a: T) -> Self {
        LyapunovCandidate::ExpPotential { a, potential }
    }

    pub fn exp_radial(dim: usize, a: T, q: T, m: T) -> Result<Self, LyapunovError> {
        if !(a > T::zero() && q > T::zero() && m > T::zero()) {
            return Err(LyapunovError::InvalidParameter(format!(
                "ExpRadial needs a, q, m > 0 (a={a}, q={q}, m={m})"
            )));
        }
        // k(s) = a s^{q/2} in s = |x|², matched by c₀ + c₁s + c₂s² at s₀ = m²
        let s0 = m * m;
        let e = q * T::lit(0.5);
        let k0 = a * s0.powf(e);
        let k1 = a * e * s0.powf(e - T::one());
        let k2 = a * e * (e - T::one()) * s0.powf(e - T::lit(2.0));
        let c2 = k2 * T::lit(0.5);
        let c1 = k1 - T::lit(2.0) * c2 * s0;
        let c0 = k0 - c1 * s0 - c2 * s0 * s0;
        if c0 < T::zero() {
            return Err(LyapunovError::InvalidParameter(format!(
                "ExpRadial bridge dips below V = 1 (c0 = {c0}); increase m"
            )));
        }
        Ok(LyapunovCandidate::ExpRadial {
            dim,
            a,
            q,
            m,
            bridge: [c0, c1, c2],
        })
    }

    pub fn power_radial(dim: usize, a: T) -> Self {
        LyapunovCandidate::PowerRadial { dim, a }
    }

    /// `inf Λ` is taken over `[-R_x, R_x]^d` with `n` nodes per axis.
    pub fn kinetic_exp(potential: Potential<T>, g: AuxG<T>, a: T, b: T, rx: T, n: usize) -> Result<Self, LyapunovError> {
        if !(a > T::zero() && b > T::zero()) || g.dim() != potential.dim() {
            return Err(LyapunovError::InvalidParameter("kinetic candidates need a, b > 0 and dim G = dim F".into()));
        }
        let inf_lambda = lambda_infimum(&potential, &g, a, b, rx, n)?;
        Ok(LyapunovCandidate::KineticExp {
            potential,
            g,
            a,
            b,
            inf_lambda,
        })
    }

    pub fn kinetic_affine(potential: Potential<T>, g: AuxG<T>, a: T, b: T, shift: T) -> Result<Self, LyapunovError> {
        if !(a > T::zero() && b > T::zero()) || g.dim() != potential.dim() {
            return Err(LyapunovError::InvalidParameter("kinetic candidates need a, b > 0 and dim G = dim F".into()));
        }
        Ok(LyapunovCandidate::KineticAffine {
            potential,
            g,
            a,
            b,
            shift,
        })
    }

    /// Expression over `x1..x{dim}`.
    pub fn custom(text: &str, dim: usize) -> Result<Self, LyapunovError> {
        let expr = Expr::parse_indexed(text, dim).map_err(|e| LyapunovError::InvalidParameter(e.to_string()))?;
        Ok(LyapunovCandidate::Custom { dim, expr })
    }

    pub fn is_kinetic(&self) -> bool {
        matches!(self, LyapunovCandidate::KineticExp { .. } | LyapunovCandidate::KineticAffine { .. })
    }
}

impl<T: Real> Smooth<T> for LyapunovCandidate<T> {
    fn dim(&self) -> usize {
        match self {
            LyapunovCandidate::ExpPotential { potential, .. } => potential.dim(),
            LyapunovCandidate::ExpRadial { dim, .. }
            | LyapunovCandidate::PowerRadial { dim, .. }
            | LyapunovCandidate::Custom { dim, .. } => *dim,
            LyapunovCandidate::KineticExp { potential, .. } | LyapunovCandidate::KineticAffine { potential, .. } => {
                2 * potential.dim()
            }
        }
    }

    fn value(&self, x: &[T]) -> Result<T, EvalError> {
        match self {
            // the jet is singular at the origin, the value is not
            LyapunovCandidate::PowerRadial { a, dim } if x.len() == *dim => Ok((T::one() + norm(x)).powf(*a)),
            LyapunovCandidate::Custom { expr, dim } if x.len() == *dim => Ok(expr.eval(x)),
            _ => Ok(self.jet(x)?.value),
        }
    }

    fn jet(&self, x: &[T]) -> Result<Jet<T>, EvalError> {
        let d = self.dim();
        if x.len() != d {
            return Err(EvalError::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        match self {
            LyapunovCandidate::ExpPotential { a, potential } => {
                let f = potential.jet(x)?;
                let v = (*a * f.value).exp();
                Ok(f.compose(v, *a * v, *a * *a * v))
            }
            LyapunovCandidate::ExpRadial { a, q, m, bridge, .. } => {
                let r = norm(x);
                if r >= *m {
                    let h = *a * r.powf(*q);
                    let h1 = *a * *q * r.powf(*q - T::one());
                    let h2 = *a * *q * (*q - T::one()) * r.powf(*q - T::lit(2.0));
                    let v = h.exp();
                    Ok(smoothed_radial_jet(x, r, v, v * h1, v * (h2 + h1 * h1)))
                } else {
                    let [c0, c1, c2] = *bridge;
                    let mut s = Jet::constant(r * r, d);
                    for i in 0..d {
                        s.grad[i] = T::lit(2.0) * x[i];
                        s.hess[i * d + i] = T::lit(2.0);
                    }
                    let p = c0 + c1 * s.value + c2 * s.value * s.value;
                    let p1 = c1 + T::lit(2.0) * c2 * s.value;
                    let p2 = T::lit(2.0) * c2;
                    let v = p.exp();
                    Ok(s.compose(v, v * p1, v * (p2 + p1 * p1)))
                }
            }
            LyapunovCandidate::PowerRadial { a, .. } => {
                let r = norm(x);
                if r == T::zero() {
                    return Err(EvalError::SingularPoint {
                        point: pt(x),
                        what: "(1+|x|)^a at the origin".into(),
                    });
                }
                let one = T::one();
                let g = (one + r).powf(*a);
                let g1 = *a * (one + r).powf(*a - one);
                let g2 = *a * (*a - one) * (one + r).powf(*a - T::lit(2.0));
                Ok(smoothed_radial_jet(x, r, g, g1, g2))
            }
            LyapunovCandidate::KineticExp {
                potential,
                g,
                a,
                b,
                inf_lambda,
            } => {
                let l = lambda_jet(potential, g, *a, *b, x)?;
                let v = (l.value - *inf_lambda).exp();
                Ok(l.compose(v, v, v))
            }
            LyapunovCandidate::KineticAffine {
                potential,
                g,
                a,
                b,
                shift,
            } => {
                let mut l = lambda_jet(potential, g, *a, *b, x)?;
                l.value += *shift;
                Ok(l)
            }
            LyapunovCandidate::Custom { expr, .. } => {
                let f = |y: &[T]| expr.eval(y);
                let jet = finite_difference_jet(&f, x);
                if !jet.value.is_finite() || jet.grad.iter().chain(&jet.hess).any(|v| !v.is_finite()) {
                    return Err(EvalError::NonFinite {
                        point: pt(x),
                        what: "custom Lyapunov candidate".into(),
                    });
                }
                Ok(jet)
            }
        }
    }
}

impl<T: Real> fmt::Display for LyapunovCandidate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LyapunovCandidate::ExpPotential { a, potential } => write!(f, "ExpPotential(a={a}, F={potential})"),
            LyapunovCandidate::ExpRadial { a, q, m, .. } => write!(f, "ExpRadial(a={a}, q={q}, M={m})"),
            LyapunovCandidate::PowerRadial { a, .. } => write!(f, "PowerRadial(a={a})"),
            LyapunovCandidate::KineticExp {
                a, b, g, inf_lambda, ..
            } => write!(f, "KineticExp(a={a}, b={b}, G={g}, inf_lambda={inf_lambda})"),
            LyapunovCandidate::KineticAffine { a, b, g, shift, .. } => {
                write!(f, "KineticAffine(a={a}, b={b}, G={g}, M={shift})")
            }
            LyapunovCandidate::Custom { expr, .. } => write!(f, "Custom({})", expr.to_text_indexed()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(c: &LyapunovCandidate<f64>, x: &[f64], tol: f64) {
        let j = c.jet(x).unwrap();
        let fd = finite_difference_jet(&|y: &[f64]| c.value(y).unwrap(), x);
        let scale = j.value.abs().max(1.0);
        assert!((j.value - fd.value).abs() < 1e-12 * scale);
        for (a, b) in j.grad.iter().zip(&fd.grad) {
            assert!((a - b).abs() < tol * scale, "{c} grad {a} {b} at {x:?}");
        }
        for (a, b) in j.hess.iter().zip(&fd.hess) {
            assert!((a - b).abs() < tol * scale, "{c} hess {a} {b} at {x:?}");
        }
    }

    #[test]
    fn closed_form_jets_match_differences() {
        let f = Potential::power(1, 1.5, 0.1);
        fd_check(&LyapunovCandidate::exp_potential(f.clone(), 0.7), &[0.8], 1e-5);
        let er = LyapunovCandidate::exp_radial(2, 0.3, 0.5, 1.0).unwrap();
        for x in [[0.3, -0.2], [1.5, 2.0], [0.0, 0.0]] {
            fd_check(&er, &x, 1e-5);
        }
        fd_check(&LyapunovCandidate::power_radial(1, 0.15), &[-2.5], 1e-6);
        let g = AuxG::smoothed_norm(1, 2.0);
        let q = Potential::quadratic(1, 1.0);
        let ke = LyapunovCandidate::kinetic_exp(q.clone(), g.clone(), 0.05, 0.1, 6.0, 241).unwrap();
        fd_check(&ke, &[1.2, -0.7], 1e-5);
        let ka = LyapunovCandidate::kinetic_affine(q.clone(), AuxG::potential_power(Potential::power(1, 4.0, 0.1), 0.75), 0.2, 0.05, 1.0).unwrap();
        fd_check(&ka, &[1.3, 0.4], 1e-4);
    }

    #[test]
    fn bridge_is_c2_at_the_matching_radius() {
        let er = LyapunovCandidate::exp_radial(1, 0.4f64, 0.5, 1.0).unwrap();
        let lo = er.jet(&[1.0 - 1e-9]).unwrap();
        let hi = er.jet(&[1.0 + 1e-9]).unwrap();
        assert!((lo.value - hi.value).abs() < 1e-8);
        assert!((lo.grad[0] - hi.grad[0]).abs() < 1e-7);
        assert!((lo.hess[0] - hi.hess[0]).abs() < 1e-6);
        assert!(er.value(&[0.0]).unwrap() >= 1.0);
    }

    #[test]
    fn lambda_infimum_matches_closed_form() {
        // F = x²/2, G = sqrt(δ² + x²): 2aF + bG − b²G'²/(4a) is minimal at x = 0 for small b
        let (a, b, delta) = (0.05f64, 0.1, 2.0);
        let inf = lambda_infimum(&Potential::quadratic(1, 1.0), &AuxG::smoothed_norm(1, delta), a, b, 6.0, 1201).unwrap();
        assert!((inf - b * delta).abs() < 1e-12);
    }
}
