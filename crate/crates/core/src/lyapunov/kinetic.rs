use super::drift::{fit_drift_params, verify_drift, DriftSet, FittedDrift, GridSpec, PhiFamily};
use super::{lambda_infimum, AuxG, DriftCertificate, LyapunovCandidate, LyapunovError, PhiSpec};
use crate::generators::Generator;
use crate::potentials::{norm, Potential};
use crate::scalar::{linear_fit, linspace};
use crate::Real;

/// Outer fraction of the grid radius standing in for `|x| → ∞`.
pub const DEFAULT_ANNULUS: f64 = 0.2;

/// Admissible `(a, b)` for the kinetic functional, given `c` (with `liminf ⟨∇G, ∇F⟩ = 2c`), `κ` and `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticRegion<T> {
    pub c: T,
    pub kappa: T,
    pub d: usize,
}

/// One inequality `lhs < rhs` (or `≤` when `strict` is false).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint<T> {
    pub name: &'static str,
    pub lhs: T,
    pub rhs: T,
    pub strict: bool,
}

impl<T: Real> Constraint<T> {
    pub fn holds(&self) -> bool {
        if self.strict {
            self.lhs < self.rhs
        } else {
            self.lhs <= self.rhs
        }
    }
}

impl<T: Real> KineticRegion<T> {
    pub fn constraints(&self, a: T, b: T) -> [Constraint<T>; 6] {
        let (c, k) = (self.c, self.kappa);
        let d = T::from_usize_lossy(self.d);
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let mix = b / two + four * a;
        [
            Constraint { name: "kappa(b/2+4a) < c/4", lhs: k * mix, rhs: c / four, strict: true },
            Constraint { name: "ad + kappa b(b/2+4a) < cb/2", lhs: a * d + k * b * mix, rhs: c * b / two, strict: true },
            Constraint { name: "cb/8d < a", lhs: c * b / (T::lit(8.0) * d), rhs: a, strict: true },
            Constraint { name: "a < cb/4d", lhs: a, rhs: c * b / (four * d), strict: true },
            Constraint { name: "b <= 1/8", lhs: b, rhs: T::lit(0.125), strict: false },
            Constraint { name: "a <= 1/2", lhs: a, rhs: T::lit(0.5), strict: false },
        ]
    }

    pub fn contains(&self, a: T, b: T) -> bool {
        a > T::zero() && b > T::zero() && self.constraints(a, b).iter().all(Constraint::holds)
    }

    /// First violated constraint.
    pub fn binding(&self, a: T, b: T) -> Option<&'static str> {
        self.constraints(a, b).iter().find(|c| !c.holds()).map(|c| c.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticChoice<T> {
    pub region: KineticRegion<T>,
    pub a: T,
    pub b: T,
}

/// Largest feasible `b` on the line `a = 3cb/16d`.
pub fn kinetic_param_search<T: Real>(c: T, kappa: T, d: usize) -> Result<KineticChoice<T>, LyapunovError> {
    if !(c > T::zero()) {
        return Err(LyapunovError::EmptyRegion {
            binding: "liminf <grad G, grad F> = 2c > 0".into(),
        });
    }
    if d == 0 || !(kappa >= T::zero()) {
        return Err(LyapunovError::InvalidParameter("need d >= 1 and kappa >= 0".into()));
    }
    let region = KineticRegion { c, kappa, d };
    let a_of = |b: T| T::lit(3.0) * c * b / (T::lit(16.0) * T::from_usize_lossy(d));
    let top = T::lit(0.125);
    let b = if region.contains(a_of(top), top) {
        top
    } else {
        let (mut lo, mut hi) = (T::zero(), top);
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid == lo || mid == hi {
                break;
            }
            if region.contains(a_of(mid), mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo == T::zero() {
            let tiny = T::epsilon();
            return Err(LyapunovError::EmptyRegion {
                binding: region.binding(a_of(tiny), tiny).unwrap_or("a, b > 0").into(),
            });
        }
        lo
    };
    Ok(KineticChoice { region, a: a_of(b), b })
}

/// Fits a linear drift certificate for `V = e^{Λ_{a,b} − inf Λ}` on a phase-space grid.
pub fn certify_kinetic<T: Real>(
    f: &Potential<T>,
    g: &AuxG<T>,
    choice: &KineticChoice<T>,
    grid: &GridSpec<T>,
) -> Result<FittedDrift<T>, LyapunovError> {
    let d = f.dim();
    if grid.dim() != 2 * d {
        return Err(LyapunovError::InvalidParameter("phase-space grid must have 2d axes".into()));
    }
    let rx = (0..d).map(|k| grid.hi[k].max(-grid.lo[k])).fold(T::zero(), T::max);
    // nested in the grid's own x nodes so that V ≥ 1 holds there exactly
    let n = 4 * ((0..d).map(|k| grid.n[k]).max().unwrap_or(2) - 1) + 1;
    let cand = LyapunovCandidate::kinetic_exp(f.clone(), g.clone(), choice.a, choice.b, rx, n)?;
    fit_drift_params(&Generator::kinetic(f.clone()), &cand, &PhiFamily::Linear, grid)
}

/// Grid proxies for the constants of the kinetic drift condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticConstants<T> {
    /// Half the minimum of `⟨∇G, ∇F⟩` over the outer annulus.
    pub c: T,
    /// `max |∇G|² / (1 + |⟨∇F, ∇G⟩|)` over the grid.
    pub kappa: T,
    /// `max ‖∇²G‖` (Frobenius, an upper bound on the operator norm).
    pub hess_g_sup: T,
    pub annulus: T,
    /// `‖∇²G‖ < c/16d`
    pub hessian_condition: bool,
}

pub fn estimate_kinetic_constants<T: Real>(
    f: &Potential<T>,
    g: &AuxG<T>,
    half_width: T,
    n: usize,
    annulus: T,
) -> Result<KineticConstants<T>, LyapunovError> {
    let d = f.dim();
    if g.dim() != d || !(annulus > T::zero() && annulus <= T::one()) || n < 2 {
        return Err(LyapunovError::InvalidParameter("bad dimensions, annulus or node count".into()));
    }
    let grid = GridSpec::cube(d, half_width, n);
    let r_in = (T::one() - annulus) * half_width;
    let mut min_dot = T::infinity();
    let mut kappa = T::zero();
    let mut hess = T::zero();
    for k in 0..grid.len() {
        let x = grid.point(k);
        let (fj, gj) = match (f.jet(&x), g.jet(&x)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(crate::EvalError::SingularPoint { .. }), _) | (_, Err(crate::EvalError::SingularPoint { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        };
        let dot: T = fj.grad.iter().zip(&gj.grad).map(|(p, q)| *p * *q).sum();
        let gg: T = gj.grad.iter().map(|v| *v * *v).sum();
        if norm(&x) >= r_in {
            min_dot = min_dot.min(dot);
        }
        kappa = kappa.max(gg / (T::one() + dot.abs()));
        hess = hess.max(gj.hess.iter().map(|v| *v * *v).sum::<T>().sqrt());
    }
    let c = min_dot * T::lit(0.5);
    Ok(KineticConstants {
        c,
        kappa,
        hess_g_sup: hess,
        annulus,
        hessian_condition: hess < c / (T::lit(16.0) * T::from_usize_lossy(d)),
    })
}

/// `[(p − 2)/(2p), (p − 2)/p]` for `F ~ |x|^p`; `None` when `p < 2`.
pub fn admissible_alpha_window<T: Real>(p: T) -> Option<(T, T)> {
    let two = T::lit(2.0);
    if p < two {
        return None;
    }
    Some(((p - two) / (two * p), (p - two) / p))
}

#[derive(Debug, Clone)]
pub struct EntropyReport<T> {
    /// Log-log slopes in `|x|` over the annulus of `|∇F|²/F^{1+α}`, `|∇F|²/F^{1+2α}` and `|∇²F|/F^α`.
    pub slopes: [T; 3],
    pub inf_lambda: T,
    /// `M` in `V = Λ_{a,b} + M`.
    pub shift: T,
    /// Smallest grid radius beyond which the sufficient inequality holds for every `v`; `None` if it never does.
    pub r_star: Option<T>,
    pub certificate: DriftCertificate<T>,
}

/// Slope tolerance when deciding whether a ratio grows or decays over the annulus.
const SLOPE_TOL: f64 = 0.1;

/// Entropy Lyapunov function `V = Λ_{a,b} + M` with `G = F^{1−α}` and
/// `M = max(0, −inf Λ) + 1`, checked against `LV ≤ −ηV + b·1_C` on `grid` (phase space).
#[allow(clippy::too_many_arguments)]
pub fn entropy_lyapunov<T: Real>(
    f: &Potential<T>,
    alpha: T,
    a: T,
    b: T,
    eta: T,
    grid: &GridSpec<T>,
    annulus: T,
) -> Result<EntropyReport<T>, LyapunovError> {
    let d = f.dim();
    if !(alpha >= T::zero() && alpha < T::one()) || !(eta > T::zero()) || grid.dim() != 2 * d {
        return Err(LyapunovError::InvalidParameter(
            "need alpha in [0, 1), eta > 0 and a phase-space grid".into(),
        ));
    }
    let rx = (0..d).map(|k| grid.hi[k].min(-grid.lo[k])).fold(T::infinity(), T::min);
    let nx = grid.n[0];

    // conditions along the first axis
    let rs = linspace((T::one() - annulus) * rx, rx, 64);
    let (mut lr, mut y1, mut y2, mut y3) = (vec![], vec![], vec![], vec![]);
    for &r in &rs {
        let mut x = vec![T::zero(); d];
        x[0] = r;
        let j = f.jet(&x)?;
        if !(j.value > T::zero()) {
            return Err(LyapunovError::ConditionFails(format!("F({r}) = {} is not positive on the annulus", j.value)));
        }
        let g2: T = j.grad.iter().map(|v| *v * *v).sum();
        let h = j.hess.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let lf = j.value.ln();
        lr.push(r.ln());
        y1.push(g2.ln() - (T::one() + alpha) * lf);
        y2.push(g2.ln() - (T::one() + T::lit(2.0) * alpha) * lf);
        y3.push(h.max(T::min_positive_value()).ln() - alpha * lf);
    }
    let slope = |y: &[T]| linear_fit(&lr, y).map(|(_, s)| s).unwrap_or(T::nan());
    let slopes = [slope(&y1), slope(&y2), slope(&y3)];
    let tol = T::lit(SLOPE_TOL);
    let mut failed = Vec::new();
    if !(slopes[0] >= -tol) {
        failed.push(format!("(1) lower: |grad F|^2/F^(1+alpha) decays with slope {}", slopes[0]));
    }
    if !(slopes[1] <= tol) {
        failed.push(format!("(1) upper: |grad F|^2/F^(1+2alpha) grows with slope {}", slopes[1]));
    }
    if !(slopes[2] <= tol) {
        failed.push(format!("(2): |hess F|/F^alpha grows with slope {}", slopes[2]));
    }
    if !failed.is_empty() {
        return Err(LyapunovError::ConditionFails(failed.join("; ")));
    }

    let g = AuxG::potential_power(f.clone(), T::one() - alpha);
    let inf_lambda = lambda_infimum(f, &g, a, b, rx, 4 * (nx - 1) + 1)?;
    let shift = (-inf_lambda).max(T::zero()) + T::one();

    // sufficient inequality: A(x)|v|² + B(x) ≥ 0 for all v iff A ≥ 0 and B ≥ 0
    let xgrid = GridSpec::cube(d, rx, nx);
    let two = T::lit(2.0);
    let dd = T::from_usize_lossy(d);
    let mut fail_r = T::neg_infinity();
    let mut any_ok = false;
    for k in 0..xgrid.len() {
        let x = xgrid.point(k);
        let j = f.jet(&x)?;
        let ok = if j.value > T::zero() {
            let fa = j.value.powf(alpha);
            let g2: T = j.grad.iter().map(|v| *v * *v).sum();
            let h = j.hess.iter().map(|v| *v * *v).sum::<T>().sqrt();
            let coef = (two - eta) * a - two * b * eta - b * (T::one() - alpha) * h / fa;
            let cst = b * g2 / fa * (T::one() - alpha - two * eta / fa)
                - (shift + a * dd + two * a * eta * j.value + b * eta * j.value.powf(T::one() - alpha));
            coef >= T::zero() && cst >= T::zero()
        } else {
            false
        };
        if ok {
            any_ok = true;
        } else {
            fail_r = fail_r.max(norm(&x));
        }
    }
    let r_star = (any_ok && fail_r < rx).then(|| fail_r.max(T::zero()));

    let cand = LyapunovCandidate::kinetic_affine(f.clone(), g, a, b, shift)?;
    let gen = Generator::kinetic(f.clone());
    let phi = PhiSpec::Linear(eta);
    let probe = verify_drift(&gen, &cand, &phi, T::zero(), DriftSet::Empty, grid)?;
    // C = smallest sublevel set holding every node with LV + ηV > 0
    let mut theta = T::zero();
    let mut bmax = T::zero();
    for k in 0..grid.len() {
        let m = probe.margins[k];
        if m < T::zero() {
            let z = grid.point(k);
            let v = crate::generators::Smooth::value(&cand, &z)?;
            theta = theta.max(v);
            bmax = bmax.max(-m);
        }
    }
    let (b_cert, set) = if bmax > T::zero() {
        (bmax * (T::one() + T::lit(1e-12)), DriftSet::Sublevel { theta })
    } else {
        (T::zero(), DriftSet::Empty)
    };
    let mut certificate = verify_drift(&gen, &cand, &phi, b_cert, set, grid)?;
    if r_star.is_none() {
        certificate
            .notes
            .push("sufficient inequality fails somewhere on the outer position grid".into());
    }
    Ok(EntropyReport {
        slopes,
        inf_lambda,
        shift,
        r_star,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_on_the_quadratic_example() {
        let ch = kinetic_param_search(1.0f64, 1.0, 1).unwrap();
        assert!((ch.b - 0.125).abs() < 1e-15 && (ch.a - 3.0 / 128.0).abs() < 1e-15);
        assert!(ch.region.contains(ch.a, ch.b));
        assert!(ch.region.contains(0.02, 0.1));
        for c in ch.region.constraints(0.02, 0.1) {
            assert!(c.holds(), "{}", c.name);
        }
        match kinetic_param_search(0.0f64, 1.0, 1) {
            Err(LyapunovError::EmptyRegion { binding }) => assert!(binding.contains("liminf")),
            other => panic!("{other:?}"),
        }
        // large kappa forces bisection below 1/8
        let tight = kinetic_param_search(1.0f64, 20.0, 1).unwrap();
        assert!(tight.b < 0.125 && tight.region.contains(tight.a, tight.b));
    }

    #[test]
    fn kinetic_exp_certifies_on_box_six() {
        let f = Potential::quadratic(1, 1.0);
        let g = AuxG::smoothed_norm(1, 16.5);
        let est = estimate_kinetic_constants(&f, &g, 6.0, 241, DEFAULT_ANNULUS).unwrap();
        assert!(est.c > 0.0 && est.kappa <= 1.0 && est.hess_g_sup <= 1.0 / 16.5 + 1e-12);
        let ch = kinetic_param_search(1.0f64, 1.0, 1).unwrap();
        let fit = certify_kinetic(&f, &g, &ch, &GridSpec::cube(2, 6.0, 121)).unwrap();
        assert!(fit.certificate.valid, "{}", fit.certificate.report());
    }

    #[test]
    fn alpha_window_and_entropy_conditions() {
        assert_eq!(admissible_alpha_window(2.0f64), Some((0.0, 0.0)));
        let (lo, hi) = admissible_alpha_window(4.0f64).unwrap();
        assert!(lo <= 0.25 && 0.25 <= hi);
        assert!(admissible_alpha_window(1.5f64).is_none());

        let grid = GridSpec::cube(2, 6.0, 81);
        let rep = entropy_lyapunov(&Potential::power(1, 2.0f64, 0.1), 0.0, 0.5, 0.1, 0.05, &grid, 0.2).unwrap();
        assert!(rep.slopes.iter().all(|s| s.abs() < 0.1), "{:?}", rep.slopes);
        assert!(rep.r_star.is_some());
        assert!(rep.certificate.valid, "{}", rep.certificate.report());

        match entropy_lyapunov(&Potential::power(1, 1.5, 0.1), 0.0, 0.5, 0.1, 0.05, &grid, 0.2) {
            Err(LyapunovError::ConditionFails(m)) => assert!(m.contains("(1) lower")),
            other => panic!("{other:?}"),
        }
    }
}
