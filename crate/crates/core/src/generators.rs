//! Diffusion generators, test functions and the carré du champ.

use std::fmt;

use crate::error::{pt, EvalError};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::potentials::{finite_difference_jet, GibbsMeasure, Potential};
use crate::scalar::sum_compensated;
use crate::Real;

/// Something with a value, gradient and Hessian at every point of its domain.
pub trait Smooth<T: Real> {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[T]) -> Result<Jet<T>, EvalError>;

    fn value(&self, x: &[T]) -> Result<T, EvalError> {
        Ok(self.jet(x)?.value)
    }
}

impl<T: Real> Smooth<T> for Potential<T> {
    fn dim(&self) -> usize {
        Potential::dim(self)
    }

    fn jet(&self, x: &[T]) -> Result<Jet<T>, EvalError> {
        Potential::jet(self, x)
    }

    fn value(&self, x: &[T]) -> Result<T, EvalError> {
        Potential::value(self, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator<T> {
    /// `½Δ − ∇F·∇`, invariant measure `e^{-2F}`.
    Overdamped(Potential<T>),
    /// `½ Σ σ_i² ∂_i² + b·∇` with constant diagonal `σ` and parsed drift `b`.
    Diffusion { sigma: Vec<T>, drift: Vec<Expr> },
    /// `½Δ_v + v·∇_x − (v + ∇F(x))·∇_v` on `(x, v)`, invariant measure `e^{-(|v|² + 2F(x))}`.
    Kinetic(Potential<T>),
}

impl<T: Real> Generator<T> {
    pub fn overdamped(f: Potential<T>) -> Self {
        Generator::Overdamped(f)
    }

    pub fn kinetic(f: Potential<T>) -> Self {
        Generator::Kinetic(f)
    }

    /// Identity `σ` when `sigma` is `None`.
    pub fn diffusion(sigma: Option<Vec<T>>, drift: Vec<Expr>) -> Self {
        let d = drift.len();
        let sigma = sigma.unwrap_or_else(|| vec![T::one(); d]);
        assert_eq!(sigma.len(), d, "one sigma per coordinate");
        assert!(drift.iter().all(|e| e.arity() <= d));
        Generator::Diffusion { sigma, drift }
    }

    /// Dimension of the state space (`2d` for kinetic).
    pub fn state_dim(&self) -> usize {
        match self {
            Generator::Overdamped(f) => f.dim(),
            Generator::Diffusion { drift, .. } => drift.len(),
            Generator::Kinetic(f) => 2 * f.dim(),
        }
    }

    /// Potential whose `e^{-2·}` is the invariant density, when known in closed form.
    pub fn invariant_potential(&self) -> Option<Potential<T>> {
        match self {
            Generator::Overdamped(f) => Some(f.clone()),
            Generator::Kinetic(f) => Some(Potential::phase_space(f.clone())),
            Generator::Diffusion { .. } => None,
        }
    }

    fn check(&self, jet: &Jet<T>, x: &[T]) -> Result<(), EvalError> {
        let d = self.state_dim();
        if x.len() != d || jet.dim() != d {
            return Err(EvalError::DimensionMismatch {
                expected: d,
                got: if x.len() != d { x.len() } else { jet.dim() },
            });
        }
        Ok(())
    }

    /// `Lf(x)` from the jet of `f` at `x`.
    pub fn apply_jet(&self, f: &Jet<T>, x: &[T]) -> Result<T, EvalError> {
        self.check(f, x)?;
        let half = T::lit(0.5);
        let out = match self {
            Generator::Overdamped(pot) => {
                let g = pot.grad(x)?;
                half * f.laplacian() - dot(&g, &f.grad)
            }
            Generator::Diffusion { sigma, drift } => {
                let mut s = T::zero();
                for (i, e) in drift.iter().enumerate() {
                    s += half * sigma[i] * sigma[i] * f.h(i, i) + e.eval(x) * f.grad[i];
                }
                s
            }
            Generator::Kinetic(pot) => {
                let d = pot.dim();
                let (xs, vs) = x.split_at(d);
                let g = pot.grad(xs)?;
                let mut s = T::zero();
                for i in 0..d {
                    s += half * f.h(d + i, d + i) + vs[i] * f.grad[i] - (vs[i] + g[i]) * f.grad[d + i];
                }
                s
            }
        };
        if !out.is_finite() {
            return Err(EvalError::NonFinite {
                point: pt(x),
                what: "Lf".into(),
            });
        }
        Ok(out)
    }

    pub fn apply(&self, f: &dyn Smooth<T>, x: &[T]) -> Result<T, EvalError> {
        self.apply_jet(&f.jet(x)?, x)
    }

    /// `Γ(f, g)` from jets.
    pub fn gamma_jets(&self, f: &Jet<T>, g: &Jet<T>) -> T {
        match self {
            Generator::Overdamped(_) => dot(&f.grad, &g.grad),
            Generator::Diffusion { sigma, .. } => (0..sigma.len())
                .map(|i| sigma[i] * sigma[i] * f.grad[i] * g.grad[i])
                .sum(),
            Generator::Kinetic(pot) => {
                let d = pot.dim();
                dot(&f.grad[d..], &g.grad[d..])
            }
        }
    }

    /// `Γ(f)(x)`.
    pub fn carre_du_champ(&self, f: &dyn Smooth<T>, x: &[T]) -> Result<T, EvalError> {
        let j = f.jet(x)?;
        self.check(&j, x)?;
        Ok(self.gamma_jets(&j, &j))
    }

    pub fn carre_du_champ_pair(&self, f: &dyn Smooth<T>, g: &dyn Smooth<T>, x: &[T]) -> Result<T, EvalError> {
        let (a, b) = (f.jet(x)?, g.jet(x)?);
        self.check(&a, x)?;
        Ok(self.gamma_jets(&a, &b))
    }

    /// `(|∫ Lf dμ|, max_grid |f|)` on the measure's box grid.
    pub fn invariance_defect(&self, f: &dyn Smooth<T>, mu: &GibbsMeasure<T>) -> Result<(T, T), EvalError> {
        let mut terms = Vec::with_capacity(mu.len());
        let mut fmax = T::zero();
        for k in 0..mu.len() {
            let x = mu.point(k);
            let j = f.jet(&x)?;
            fmax = fmax.max(j.value.abs());
            terms.push(mu.weights()[k] * self.apply_jet(&j, &x)?);
        }
        Ok((sum_compensated(terms).abs(), fmax))
    }
}

impl<T: Real> fmt::Display for Generator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Overdamped(p) => write!(f, "Overdamped[{p}]"),
            Generator::Kinetic(p) => write!(f, "Kinetic[{p}]"),
            Generator::Diffusion { sigma, drift } => {
                let names = |i: usize| format!("x{}", i + 1);
                let b: Vec<String> = drift.iter().map(|e| e.display(&names).to_string()).collect();
                write!(f, "Diffusion[sigma={sigma:?}, drift=({})]", b.join(", "))
            }
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Sparse polynomial `Σ c · Π x_k^{e_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    dim: usize,
    terms: Vec<(T, Vec<u32>)>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(dim: usize, terms: Vec<(T, Vec<u32>)>) -> Self {
        assert!(terms.iter().all(|(_, e)| e.len() == dim));
        Polynomial { dim, terms }
    }

    /// One-variable polynomial from coefficients of `1, x, x², ...`.
    pub fn univariate(coeffs: &[T]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != T::zero())
            .map(|(k, c)| (*c, vec![k as u32]))
            .collect();
        Polynomial { dim: 1, terms }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, ea) in &self.terms {
            for (b, eb) in &other.terms {
                terms.push((*a * *b, ea.iter().zip(eb).map(|(x, y)| x + y).collect()));
            }
        }
        Polynomial { dim: self.dim, terms }
    }

    fn jet_at(&self, x: &[T]) -> Jet<T> {
        let d = self.dim;
        let mut out = Jet::constant(T::zero(), d);
        let pw = |v: T, e: u32| if e == 0 { T::one() } else { v.powi(e as i32) };
        for (c, e) in &self.terms {
            let mono = |skip: &[(usize, u32)]| -> T {
                let mut m = *c;
                for k in 0..d {
                    let mut ek = e[k];
                    let mut factor = T::one();
                    for &(s, times) in skip {
                        if s == k {
                            for _ in 0..times {
                                if ek == 0 {
                                    return T::zero();
                                }
                                factor *= T::from_u32(ek).expect("small exponent");
                                ek -= 1;
                            }
                        }
                    }
                    m *= factor * pw(x[k], ek);
                }
                m
            };
            out.value += mono(&[]);
            for i in 0..d {
                out.grad[i] += mono(&[(i, 1)]);
                for j in 0..d {
                    out.hess[i * d + j] += if i == j { mono(&[(i, 2)]) } else { mono(&[(i, 1), (j, 1)]) };
                }
            }
        }
        out
    }
}

/// Samples of a function on a uniform 1D grid; derivatives by second-order stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    lo: T,
    h: T,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(lo: T, hi: T, values: Vec<T>) -> Self {
        assert!(values.len() >= 4 && hi > lo);
        let h = (hi - lo) / T::from_usize_lossy(values.len() - 1);
        GridFunction { lo, h, values }
    }

    pub fn from_fn<F: Fn(T) -> T>(lo: T, hi: T, n: usize, f: F) -> Self {
        let xs = crate::scalar::linspace(lo, hi, n);
        Self::new(lo, hi, xs.into_iter().map(f).collect())
    }

    fn node_derivatives(&self, i: usize) -> (T, T, T) {
        let f = &self.values;
        let n = f.len();
        let (h, two) = (self.h, T::lit(2.0));
        if i == 0 {
            (
                f[0],
                (-T::lit(3.0) * f[0] + T::lit(4.0) * f[1] - f[2]) / (two * h),
                (two * f[0] - T::lit(5.0) * f[1] + T::lit(4.0) * f[2] - f[3]) / (h * h),
            )
        } else if i == n - 1 {
            (
                f[i],
                (T::lit(3.0) * f[i] - T::lit(4.0) * f[i - 1] + f[i - 2]) / (two * h),
                (two * f[i] - T::lit(5.0) * f[i - 1] + T::lit(4.0) * f[i - 2] - f[i - 3]) / (h * h),
            )
        } else {
            (
                f[i],
                (f[i + 1] - f[i - 1]) / (two * h),
                (f[i + 1] - two * f[i] + f[i - 1]) / (h * h),
            )
        }
    }

    fn jet_at(&self, x: T) -> Result<Jet<T>, EvalError> {
        let n = self.values.len();
        let s = (x - self.lo) / self.h;
        let last = T::from_usize_lossy(n - 1);
        let tol = T::lit(1e-9);
        if !(s >= -tol && s <= last + tol) {
            return Err(EvalError::OutOfDomain {
                point: vec![x.f64()],
                what: "grid function".into(),
            });
        }
        let s = s.max(T::zero()).min(last);
        let i = s.floor().to_usize().unwrap_or(0).min(n - 2);
        let t = s - T::from_usize_lossy(i);
        let (a, b) = (self.node_derivatives(i), self.node_derivatives(i + 1));
        let lerp = |p: T, q: T| p + t * (q - p);
        Ok(Jet {
            value: lerp(a.0, b.0),
            grad: vec![lerp(a.1, b.1)],
            hess: vec![lerp(a.2, b.2)],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction<T> {
    Polynomial(Polynomial<T>),
    /// `x_k` (zero based).
    Coordinate { index: usize, dim: usize },
    /// `e^{aF}`
    ExpPotential { a: T, potential: Potential<T> },
    /// 1D grid function, optionally embedded as coordinate `index` of a `dim`-dimensional space.
    Grid { f: GridFunction<T>, index: usize, dim: usize },
    Expression { expr: Expr, dim: usize },
}

impl<T: Real> Smooth<T> for TestFunction<T> {
    fn dim(&self) -> usize {
        match self {
            TestFunction::Polynomial(p) => p.dim,
            TestFunction::Coordinate { dim, .. } => *dim,
            TestFunction::ExpPotential { potential, .. } => potential.dim(),
            TestFunction::Grid { dim, .. } => *dim,
            TestFunction::Expression { dim, .. } => *dim,
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
            TestFunction::Polynomial(p) => Ok(p.jet_at(x)),
            TestFunction::Coordinate { index, .. } => {
                let mut j = Jet::constant(x[*index], d);
                j.grad[*index] = T::one();
                Ok(j)
            }
            TestFunction::ExpPotential { a, potential } => {
                let f = potential.jet(x)?;
                let e = (*a * f.value).exp();
                Ok(f.compose(e, *a * e, *a * *a * e))
            }
            TestFunction::Grid { f, index, .. } => {
                let g = f.jet_at(x[*index])?;
                let mut j = Jet::constant(g.value, d);
                j.grad[*index] = g.grad[0];
                j.hess[*index * d + *index] = g.hess[0];
                Ok(j)
            }
            TestFunction::Expression { expr, .. } => {
                let j = finite_difference_jet(&|y: &[T]| expr.eval(y), x);
                if !j.value.is_finite() {
                    return Err(EvalError::NonFinite {
                        point: pt(x),
                        what: "test expression".into(),
                    });
                }
                Ok(j)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ou() -> Generator<f64> {
        Generator::overdamped(Potential::quadratic(1, 1.0))
    }

    #[test]
    fn pointwise_examples() {
        let f = TestFunction::Polynomial(Polynomial::univariate(&[0.0, 0.0, 1.0]));
        assert!((ou().apply(&f, &[1.0]).unwrap() + 1.0).abs() < 1e-15);

        let k = Generator::kinetic(Potential::power(1, 1.5, 0.1));
        let g = TestFunction::Polynomial(Polynomial::new(2, vec![(1.0, vec![3, 0]), (2.0, vec![1, 0])]));
        assert_eq!(k.apply(&g, &[1.0, 0.0]).unwrap(), 0.0);
        for x in [-2.0f64, 0.3, 4.0] {
            assert_eq!(k.carre_du_champ(&g, &[x, 1.7]).unwrap(), 0.0);
            let lf = k.apply(&g, &[x, 1.7]).unwrap();
            assert!((lf - 1.7 * (3.0 * x * x + 2.0)).abs() < 1e-12);
        }
        let c = TestFunction::Coordinate { index: 0, dim: 1 };
        assert_eq!(ou().carre_du_champ(&c, &[3.3]).unwrap(), 1.0);
    }

    #[test]
    fn gamma_identity_on_ou() {
        let p = Polynomial::univariate(&[0.0, 1.0, 1.0]);
        let f = TestFunction::Polynomial(p.clone());
        let f2 = TestFunction::Polynomial(p.mul(&p));
        let l = ou();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.random_range(-5.0..5.0)];
            let lhs = l.apply(&f2, &x).unwrap() - 2.0 * f.value(&x).unwrap() * l.apply(&f, &x).unwrap();
            let g = l.carre_du_champ(&f, &x).unwrap();
            assert!((lhs - g).abs() < 1e-8 * g.max(1.0));
        }
    }

    #[test]
    fn product_rule_for_gamma() {
        let gens = [
            Generator::kinetic(Potential::quadratic(1, 1.0)),
            Generator::diffusion(Some(vec![0.5, 2.0]), vec![
                Expr::parse_indexed("-x1", 2).unwrap(),
                Expr::parse_indexed("-x2^3", 2).unwrap(),
            ]),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let triples: Vec<[Polynomial<f64>; 3]> = vec![
            [
                Polynomial::new(2, vec![(1.0, vec![1, 1])]),
                Polynomial::new(2, vec![(2.0, vec![0, 2]), (1.0, vec![1, 0])]),
                Polynomial::new(2, vec![(1.0, vec![2, 1])]),
            ],
            [
                Polynomial::new(2, vec![(1.0, vec![0, 1]), (3.0, vec![0, 0])]),
                Polynomial::new(2, vec![(1.0, vec![3, 0])]),
                Polynomial::new(2, vec![(-1.0, vec![1, 2])]),
            ],
            [
                Polynomial::new(2, vec![(0.5, vec![2, 2])]),
                Polynomial::new(2, vec![(1.0, vec![1, 0]), (1.0, vec![0, 1])]),
                Polynomial::new(2, vec![(1.0, vec![0, 3])]),
            ],
        ];
        for l in &gens {
            for [f, g, h] in &triples {
                let (tf, tg, th) = (
                    TestFunction::Polynomial(f.clone()),
                    TestFunction::Polynomial(g.clone()),
                    TestFunction::Polynomial(h.clone()),
                );
                let fg = TestFunction::Polynomial(f.mul(g));
                for _ in 0..20 {
                    let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
                    let lhs = l.carre_du_champ_pair(&fg, &th, &x).unwrap();
                    let rhs = tf.value(&x).unwrap() * l.carre_du_champ_pair(&tg, &th, &x).unwrap()
                        + tg.value(&x).unwrap() * l.carre_du_champ_pair(&tf, &th, &x).unwrap();
                    assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn invariance_on_box() {
        let l = Generator::overdamped(Potential::power(1, 1.5, 0.1));
        let mu = GibbsMeasure::normalize(&Potential::power(1, 1.5, 0.1), 12.0, 8001).unwrap();
        for k in 1..=10u32 {
            let f = TestFunction::Polynomial(Polynomial::new(1, vec![(1.0, vec![k])]));
            let (defect, norm) = l.invariance_defect(&f, &mu).unwrap();
            assert!(defect < 1e-5 * norm, "degree {k}: {defect} vs {norm}");
        }
        let k = Generator::kinetic(Potential::quadratic(1, 1.0));
        let mu2 = GibbsMeasure::build(
            &Potential::phase_space(Potential::quadratic(1, 1.0)),
            &[7.0, 7.0],
            401,
            crate::potentials::Domain::WholeSpace,
        )
        .unwrap();
        for (a, b) in [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (3, 0), (0, 3), (2, 2), (3, 1), (1, 3)] {
            let f = TestFunction::Polynomial(Polynomial::new(2, vec![(1.0, vec![a, b])]));
            let (defect, norm) = k.invariance_defect(&f, &mu2).unwrap();
            assert!(defect < 1e-5 * norm, "x^{a} v^{b}: {defect}");
        }
    }

    #[test]
    fn gamma_is_non_negative() {
        let l = Generator::kinetic(Potential::power(1, 1.2, 0.1));
        let f = TestFunction::Expression {
            expr: Expr::parse_indexed("x1*x2^2 + exp(-x2)", 2).unwrap(),
            dim: 2,
        };
        for i in 0..41 {
            for j in 0..41 {
                let x = [-4.0 + 0.2 * i as f64, -4.0 + 0.2 * j as f64];
                assert!(l.carre_du_champ(&f, &x).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn grid_functions() {
        let g = GridFunction::from_fn(-3.0, 3.0, 601, |x: f64| x.sin());
        let f = TestFunction::Grid { f: g, index: 0, dim: 1 };
        let l = ou();
        for x in [-3.0f64, -1.234, 0.0, 2.5, 3.0] {
            let exact = -0.5 * x.sin() - x * x.cos();
            assert!((l.apply(&f, &[x]).unwrap() - exact).abs() < 1e-3, "{x}");
        }
        assert!(matches!(l.apply(&f, &[3.5]), Err(EvalError::OutOfDomain { .. })));
    }

    #[test]
    fn exp_potential_matches_chain_rule() {
        let pot = Potential::power(1, 1.3, 0.1);
        let l = Generator::overdamped(pot.clone());
        let a = 0.7f64;
        let v = TestFunction::ExpPotential { a, potential: pot.clone() };
        for x in [-3.0, 0.2, 2.0] {
            let j = pot.jet(&[x]).unwrap();
            let e = (a * j.value).exp();
            let exact = a * e * (0.5 * j.hess[0] + (0.5 * a - 1.0) * j.grad[0] * j.grad[0]);
            assert!((l.apply(&v, &[x]).unwrap() - exact).abs() < 1e-10 * e);
        }
    }
}
