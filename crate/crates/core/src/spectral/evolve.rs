use std::fmt::Write as _;

use super::{DiscretizedGenerator, Reversible1d, SpectralError};
use crate::rates::psi_sobolev;
use crate::scalar::sum_compensated;
use crate::Real;

/// Whether the grid vector is a density with respect to `μ` or a mean-zero observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolveMode {
    Density,
    Function,
}

#[derive(Debug, Clone)]
pub struct EvolveOptions<T> {
    pub mode: EvolveMode,
    /// Evolve with the `μ`-adjoint (densities under `P_t*`). Irrelevant for reversible grids.
    pub adjoint: bool,
    /// Largest internal time step.
    pub dt: T,
    /// Node weights `W` for the weighted variance and the Ψ-functional; `1` when absent.
    pub weight: Option<Vec<T>>,
}

impl<T: Real> EvolveOptions<T> {
    pub fn density(dt: T) -> Self {
        EvolveOptions {
            mode: EvolveMode::Density,
            adjoint: true,
            dt,
            weight: None,
        }
    }

    pub fn function(dt: T) -> Self {
        EvolveOptions {
            mode: EvolveMode::Function,
            adjoint: false,
            dt,
            weight: None,
        }
    }

    pub fn with_weight(mut self, w: Vec<T>) -> Self {
        self.weight = Some(w);
        self
    }
}

/// Functionals of `u_t` recorded at the output times. Entries that do not apply to the mode
/// (entropy, Ψ for observables) are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupTrace<T> {
    pub times: Vec<T>,
    /// `Σ m (u − ū)²`
    pub variance: Vec<T>,
    /// `Σ m W (u − ū)²`
    pub weighted_variance: Vec<T>,
    /// `Σ m u log u`
    pub entropy: Vec<T>,
    /// `½ Σ m |u − ū|`
    pub tv: Vec<T>,
    /// `Σ m Ψ(u) W`
    pub psi_functional: Vec<T>,
    /// `Σ m u`
    pub mass: Vec<T>,
    /// Most negative entry seen (densities only).
    pub min_value: T,
}

impl<T: Real> SemigroupTrace<T> {
    pub(crate) fn new() -> Self {
        SemigroupTrace {
            times: Vec::new(),
            variance: Vec::new(),
            weighted_variance: Vec::new(),
            entropy: Vec::new(),
            tv: Vec::new(),
            psi_functional: Vec::new(),
            mass: Vec::new(),
            min_value: T::infinity(),
        }
    }

    pub(crate) fn record(&mut self, t: T, u: &[T], m: &[T], w: Option<&[T]>, mode: EvolveMode) {
        let mass = sum_compensated(u.iter().zip(m).map(|(a, b)| *a * *b));
        let mean = mass / sum_compensated(m.iter().copied());
        let wt = |i: usize| w.map_or(T::one(), |w| w[i]);
        let n = u.len();
        let var = sum_compensated((0..n).map(|i| m[i] * (u[i] - mean) * (u[i] - mean)));
        let wvar = sum_compensated((0..n).map(|i| m[i] * wt(i) * (u[i] - mean) * (u[i] - mean)));
        let tv = T::lit(0.5) * sum_compensated((0..n).map(|i| m[i] * (u[i] - mean).abs()));
        let (ent, psi) = match mode {
            EvolveMode::Density => {
                let ent = sum_compensated((0..n).map(|i| {
                    let v = u[i].max(T::zero());
                    if v > T::zero() {
                        m[i] * v * v.ln()
                    } else {
                        T::zero()
                    }
                }));
                let psi = sum_compensated((0..n).map(|i| m[i] * wt(i) * psi_sobolev(u[i].max(T::zero()))));
                (ent, psi)
            }
            EvolveMode::Function => (T::nan(), T::nan()),
        };
        self.times.push(t);
        self.variance.push(var);
        self.weighted_variance.push(wvar);
        self.entropy.push(ent);
        self.tv.push(tv);
        self.psi_functional.push(psi);
        self.mass.push(mass);
        if mode == EvolveMode::Density {
            let lo = u.iter().copied().fold(T::infinity(), T::min);
            self.min_value = self.min_value.min(lo);
        }
    }

    /// CSV with header `t,variance,weighted_variance,entropy,tv,psi_functional`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,variance,weighted_variance,entropy,tv,psi_functional\n");
        for i in 0..self.times.len() {
            let row = [
                self.times[i],
                self.variance[i],
                self.weighted_variance[i],
                self.entropy[i],
                self.tv[i],
                self.psi_functional[i],
            ];
            let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt17<T: Real>(v: T) -> String {
    format!("{:.16e}", v.f64())
}

/// Evolves `u_0` and records the functionals at each of `times` (non-decreasing, `≥ 0`).
pub fn semigroup_evolve<T: Real>(
    d: &DiscretizedGenerator<T>,
    u0: &[T],
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<SemigroupTrace<T>, SpectralError> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < T::zero()) {
        return Err(SpectralError::InvalidInput("output times must be non-decreasing and >= 0".into()));
    }
    if !(opts.dt > T::zero()) {
        return Err(SpectralError::InvalidInput("dt must be positive".into()));
    }
    match d {
        DiscretizedGenerator::Reversible1d(r) => evolve_1d(r, u0, times, opts),
        DiscretizedGenerator::Kinetic2d(k) => k.evolve(u0, times, opts),
    }
}

pub(crate) fn check_initial<T: Real>(u0: &[T], m: &[T], opts: &EvolveOptions<T>) -> Result<(), SpectralError> {
    if u0.len() != m.len() {
        return Err(SpectralError::InvalidInput(format!(
            "initial vector has {} entries, grid has {}",
            u0.len(),
            m.len()
        )));
    }
    if let Some(w) = &opts.weight {
        if w.len() != m.len() {
            return Err(SpectralError::InvalidInput("weight length differs from grid".into()));
        }
    }
    let mass = sum_compensated(u0.iter().zip(m).map(|(a, b)| *a * *b));
    match opts.mode {
        EvolveMode::Density => {
            if u0.iter().any(|v| *v < T::zero()) || (mass - T::one()).abs() > T::lit(1e-6) {
                return Err(SpectralError::InvalidInput(format!(
                    "density must be non-negative with unit mass, mass = {mass}"
                )));
            }
        }
        EvolveMode::Function => {
            let scale = u0.iter().map(|v| v.abs()).fold(T::zero(), T::max).max(T::one());
            if mass.abs() > T::lit(1e-8) * scale {
                return Err(SpectralError::InvalidInput(format!("observable must have mean zero, mean = {mass}")));
            }
        }
    }
    Ok(())
}

pub(crate) fn check_negative<T: Real>(u: &[T], t: T, mode: EvolveMode) -> Result<(), SpectralError> {
    if mode == EvolveMode::Density {
        if let Some((index, v)) = u
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        {
            if v < -T::lit(1e-10) {
                return Err(SpectralError::NegativeDensity {
                    t: t.f64(),
                    min: v.f64(),
                    index,
                });
            }
        }
    }
    Ok(())
}

/// Solves `(I − θ dt A) u_new = (I + (1 − θ) dt A) u` with the Thomas algorithm.
fn theta_step<T: Real>(a: &(Vec<T>, Vec<T>, Vec<T>), u: &mut [T], dt: T, theta: T, scratch: &mut Vec<T>) {
    let (l, d, up) = a;
    let n = u.len();
    let explicit = T::one() - theta;
    let mut rhs = vec![T::zero(); n];
    for i in 0..n {
        let mut au = d[i] * u[i];
        if i > 0 {
            au += l[i] * u[i - 1];
        }
        if i + 1 < n {
            au += up[i] * u[i + 1];
        }
        rhs[i] = u[i] + explicit * dt * au;
    }
    // tridiagonal system with sub = −θdt l, diag = 1 − θdt d, sup = −θdt up
    scratch.resize(n, T::zero());
    let c = scratch;
    let sub = |i: usize| -theta * dt * l[i];
    let dia = |i: usize| T::one() - theta * dt * d[i];
    let sup = |i: usize| -theta * dt * up[i];
    let mut beta = dia(0);
    c[0] = sup(0) / beta;
    u[0] = rhs[0] / beta;
    for i in 1..n {
        beta = dia(i) - sub(i) * c[i - 1];
        c[i] = if i + 1 < n { sup(i) / beta } else { T::zero() };
        u[i] = (rhs[i] - sub(i) * u[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = u[i + 1];
        u[i] -= c[i] * next;
    }
}

/// Crank–Nicolson, with the first interval started by four implicit Euler quarter steps.
fn evolve_1d<T: Real>(
    r: &Reversible1d<T>,
    u0: &[T],
    times: &[T],
    opts: &EvolveOptions<T>,
) -> Result<SemigroupTrace<T>, SpectralError> {
    let m = r.mass();
    check_initial(u0, m, opts)?;
    let a = r.tridiagonal();
    let mut u = u0.to_vec();
    let mut trace = SemigroupTrace::new();
    let w = opts.weight.as_deref();
    let mut t = T::zero();
    let mut started = false;
    let mut scratch = Vec::new();
    let half = T::lit(0.5);
    for &target in times {
        let span = target - t;
        if span > T::zero() {
            let steps = (span / opts.dt).ceil().to_usize().unwrap_or(1).max(1);
            let dt = span / T::from_usize_lossy(steps);
            for _ in 0..steps {
                if !started {
                    for _ in 0..4 {
                        theta_step(&a, &mut u, dt * T::lit(0.25), T::one(), &mut scratch);
                    }
                    started = true;
                } else {
                    theta_step(&a, &mut u, dt, half, &mut scratch);
                }
            }
            t = target;
            check_negative(&u, t, opts.mode)?;
        }
        trace.record(target, &u, m, w, opts.mode);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;
    use crate::potentials::Potential;
    use crate::spectral::{discretize, fit_decay_window};

    fn ou_grid() -> DiscretizedGenerator<f64> {
        discretize(&Generator::overdamped(Potential::quadratic(1, 1.0)), &[8.0], 1601).unwrap()
    }

    fn nodes(d: &DiscretizedGenerator<f64>) -> (Vec<f64>, Vec<f64>) {
        match d {
            DiscretizedGenerator::Reversible1d(r) => (r.nodes().to_vec(), r.mass().to_vec()),
            _ => unreachable!(),
        }
    }

    #[test]
    fn first_hermite_mode_decays_at_twice_the_gap() {
        let d = ou_grid();
        let (x, _) = nodes(&d);
        let times: Vec<f64> = (0..=120).map(|i| i as f64 * 0.1).collect();
        let tr = semigroup_evolve(&d, &x, &times, &EvolveOptions::function(0.01)).unwrap();
        let fit = fit_decay_window(&tr.times, &tr.variance, 1e-8, 1e-2).unwrap();
        assert!((fit.rate - 2.0).abs() < 0.02 * 2.0, "{fit:?}");
        assert!(tr.variance.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn stationary_density_is_fixed() {
        let d = ou_grid();
        let (x, _) = nodes(&d);
        let times = [0.0, 1.0, 5.0];
        let tr = semigroup_evolve(&d, &vec![1.0; x.len()], &times, &EvolveOptions::density(0.01)).unwrap();
        for k in 0..3 {
            assert!(tr.variance[k].abs() < 1e-20 && tr.entropy[k].abs() < 1e-12 && tr.tv[k].abs() < 1e-12, "{tr:?}");
            assert!(tr.psi_functional[k].abs() < 1e-14);
        }
    }

    #[test]
    fn mass_is_conserved_and_functionals_decrease() {
        let d = ou_grid();
        let (x, m) = nodes(&d);
        let mut h: Vec<f64> = x.iter().map(|x| (-(x - 1.5f64).powi(2) + x * x).exp()).collect();
        let z: f64 = h.iter().zip(&m).map(|(a, b)| a * b).sum();
        h.iter_mut().for_each(|v| *v /= z);
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.2).collect();
        let tr = semigroup_evolve(&d, &h, &times, &EvolveOptions::density(0.01)).unwrap();
        assert!(tr.mass.iter().all(|v| (v - 1.0).abs() < 1e-8));
        for col in [&tr.variance, &tr.entropy, &tr.psi_functional] {
            assert!(col.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,variance,weighted_variance,entropy,tv,psi_functional\n"));
        assert_eq!(csv.lines().count(), 52);
    }

    #[test]
    fn rejects_bad_initial_data() {
        let d = ou_grid();
        let (x, _) = nodes(&d);
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        assert!(semigroup_evolve(&d, &shifted, &[1.0], &EvolveOptions::function(0.01)).is_err());
        assert!(semigroup_evolve(&d, &vec![2.0; x.len()], &[1.0], &EvolveOptions::density(0.01)).is_err());
    }
}
