use super::RateError;
use crate::generators::Smooth;
use crate::lyapunov::{DriftCertificate, LyapunovCandidate, PhiSpec};
use crate::potentials::GibbsMeasure;
use crate::quadrature::integrate_to_infinity;
use crate::Real;

/// `β_W(s) = inf{u : ∫_{V > uφ(V)} V dμ ≤ s}` from node values of `V` and `φ`.
#[derive(Debug, Clone)]
pub struct BetaWDef<T> {
    /// `V/φ(V)` per node, descending.
    ratio: Vec<T>,
    /// Cumulative `∫ V dμ` over the nodes with the largest ratios.
    mass: Vec<T>,
    /// `∫ V dμ` outside the box (exact in 1D, rough otherwise).
    tail: T,
    total: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaValue<T> {
    pub u: T,
    /// Part of `∫V dμ` the box cannot see.
    pub tail_error: T,
    /// `s ≥ ∫V dμ`, so the infimum is the boundary `u = 0`.
    pub saturated: bool,
}

impl<T: Real> BetaWDef<T> {
    /// `phi` is the rate in the halved form `LV ≤ −2φ(V) + b·1_C`.
    pub fn new(cand: &LyapunovCandidate<T>, phi: &PhiSpec<T>, mu: &GibbsMeasure<T>) -> Result<Self, RateError> {
        if cand.dim() != mu.dim() {
            return Err(RateError::InvalidInput("candidate and measure dimensions differ".into()));
        }
        let mut pairs: Vec<(T, T)> = Vec::with_capacity(mu.len());
        for (k, &w) in mu.weights().iter().enumerate() {
            let x = mu.point(k);
            let v = cand.value(&x)?;
            let p = phi.eval(v);
            if !(p > T::zero()) {
                return Err(RateError::InvalidInput(format!("phi({v}) = {p} is not positive")));
            }
            pairs.push((v / p, v * w));
        }
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut acc = T::zero();
        let mut comp = T::zero();
        let mut ratio = Vec::with_capacity(pairs.len());
        let mut mass = Vec::with_capacity(pairs.len());
        for (r, m) in pairs {
            // Kahan
            let y = m - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
            ratio.push(r);
            mass.push(acc);
        }
        let tail = tail_integral(cand, mu)?;
        Ok(BetaWDef {
            ratio,
            mass,
            tail,
            total: acc + tail,
        })
    }

    /// `β_W` for a certificate `LV ≤ −φ(V) + b·1_C`, i.e. with `φ/2` in the halved form.
    pub fn from_certificate(cert: &DriftCertificate<T>, mu: &GibbsMeasure<T>) -> Result<Self, RateError> {
        Self::new(&cert.candidate, &cert.phi.scaled(T::lit(0.5)), mu)
    }

    /// `∫V dμ` over the box plus tail.
    pub fn total(&self) -> T {
        self.total
    }

    pub fn tail(&self) -> T {
        self.tail
    }

    /// `T(u) = ∫_{V > uφ(V)} V dμ` on the box.
    pub fn t_of(&self, u: T) -> T {
        let k = self.ratio.partition_point(|r| *r > u);
        if k == 0 {
            T::zero()
        } else {
            self.mass[k - 1]
        }
    }

    /// `β_W(s)`, interpolating the step function `T` log-linearly between nodes.
    pub fn eval(&self, s: T) -> Result<BetaValue<T>, RateError> {
        if !(s > T::zero()) {
            return Err(RateError::InvalidInput(format!("s = {s} must be positive")));
        }
        if s <= self.tail {
            return Err(RateError::TruncationLimited {
                s: s.f64(),
                floor: self.tail.f64(),
            });
        }
        let box_total = *self.mass.last().unwrap_or(&T::zero());
        if s >= box_total {
            return Ok(BetaValue {
                u: T::zero(),
                tail_error: self.tail,
                saturated: true,
            });
        }
        // first k with mass[k] > s; T(u) ≤ s for u ≥ ratio[k]
        let k = self.mass.partition_point(|m| *m <= s);
        let u = if k == 0 {
            self.ratio[0]
        } else {
            let (m0, m1) = (self.mass[k - 1], self.mass[k]);
            let (r0, r1) = (self.ratio[k - 1], self.ratio[k]);
            if r0 > r1 && m1 > m0 && r1 > T::zero() && m0 > T::zero() {
                let f = (s.ln() - m0.ln()) / (m1.ln() - m0.ln());
                (r0.ln() + f * (r1.ln() - r0.ln())).exp()
            } else {
                r1
            }
        };
        Ok(BetaValue {
            u,
            tail_error: self.tail,
            saturated: false,
        })
    }
}

/// `∫ V dμ` outside the box.
fn tail_integral<T: Real>(cand: &LyapunovCandidate<T>, mu: &GibbsMeasure<T>) -> Result<T, RateError> {
    if mu.domain() == crate::potentials::Domain::Box || mu.tail_fraction() == T::zero() {
        return Ok(T::zero());
    }
    let r = mu.half_widths()[0];
    if mu.dim() == 1 {
        let f = mu.potential();
        let z = mu.z();
        let scale = (r * T::lit(0.1)).max(T::one());
        let side = |sign: T| {
            integrate_to_infinity(
                |x: T| {
                    let y = [sign * x];
                    match (cand.value(&y), f.value(&y)) {
                        (Ok(v), Ok(fv)) => v * (-T::lit(2.0) * fv).exp() / z,
                        _ => T::nan(),
                    }
                },
                r,
                scale,
                T::lit(1e-10),
            )
        };
        let t = side(T::one()) + side(-T::one());
        if !t.is_finite() {
            return Err(RateError::InvalidInput("V is not integrable in the tail".into()));
        }
        return Ok(t);
    }
    // boundary maximum of V times the tail mass
    let mut vmax = T::zero();
    for k in 0..mu.len() {
        let p = mu.point(k);
        if p.iter().zip(mu.half_widths()).any(|(x, h)| x.abs() >= *h) {
            vmax = vmax.max(cand.value(&p)?);
        }
    }
    Ok(vmax * mu.tail_fraction())
}

/// `β_W(s) = 2/(a·η(log(c_p/s)/(2 − a − p)))`.
pub fn beta_w_closed<T: Real, E: Fn(T) -> T>(a: T, p: T, c_p: T, eta: E, s: T) -> Result<T, RateError> {
    if !(a > T::zero() && a < T::lit(2.0) - p) {
        return Err(RateError::InvalidInput(format!("need 0 < a < 2 - p (a = {a}, p = {p})")));
    }
    if !(s > T::zero() && s < c_p) {
        return Err(RateError::InvalidInput(format!("need 0 < s < c_p (s = {s}, c_p = {c_p})")));
    }
    let arg = (c_p / s).ln() / (T::lit(2.0) - a - p);
    let e = eta(arg);
    if !(e > T::zero()) {
        return Err(RateError::InvalidInput(format!("eta({arg}) = {e} is not positive")));
    }
    Ok(T::lit(2.0) / (a * e))
}
