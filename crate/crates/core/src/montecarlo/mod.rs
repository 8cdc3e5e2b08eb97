//! Euler–Maruyama ensembles, empirical decay traces and rate fits.
//!
//! Noise for particle `p` at step `k` comes from the ChaCha8 stream `p` of the master seed,
//! positioned at word `256·k`, so trajectories do not depend on the thread count.

mod fit;
mod trace;

pub use fit::{fit_rate, RateFit, RateModel};
pub use trace::{
    autocovariance_trace, ensemble_density_trace, DecayTrace, DensityTraces, HistogramSpec, TraceKind,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::EvalError;
use crate::generators::Generator;
use crate::potentials::{sample_1d, GibbsMeasure, MeasureError, Potential, PotentialForm};
use crate::Real;

pub const RNG_NAME: &str = "ChaCha8 (stream = particle, word = 256 * step)";

/// ChaCha words reserved per particle and step.
const WORDS_PER_STEP: u128 = 256;

#[derive(Debug, thiserror::Error)]
pub enum MonteCarloError {
    #[error("particle {particle} became non-finite at step {step}")]
    NonFinite { particle: usize, step: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("fit window has {0} points, need at least 10")]
    WindowTooShort(usize),
    #[error("trace value {value} at t = {t} is not positive")]
    NonPositive { t: f64, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Initial laws for ensembles.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw<T> {
    /// Positions from `μ` (1D only); velocities from `e^{-|v|²}` for kinetic ensembles.
    Stationary,
    /// Independent `N(centre, σ²)` coordinates; `centre` covers the full state.
    Gaussian { centre: Vec<T>, sigma: T },
    /// Density `∝ (1 + x² + v²)^{-(a+1)}` on `(x, v)`, i.e. `h·μ` for the heavy-tailed `h` with `F = x²/2`
    /// in 1D. For qualitative runs only.
    HeavyTailed { a: T },
}

/// `n` particles in lockstep.
#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    n: usize,
    dim: usize,
    kinetic: bool,
    /// Particle `p` occupies `state[p·stride .. (p+1)·stride]`, positions first.
    state: Vec<T>,
    dt: T,
    step: u64,
    seed: u64,
}

impl<T: Real> Ensemble<T> {
    /// `dim` is the position dimension; kinetic ensembles carry as many velocities.
    pub fn new(n: usize, dim: usize, kinetic: bool, dt: T, seed: u64) -> Result<Self, MonteCarloError> {
        if n == 0 || dim == 0 || !(dt > T::zero()) {
            return Err(MonteCarloError::InvalidInput("need n >= 1, dim >= 1, dt > 0".into()));
        }
        let stride = if kinetic { 2 * dim } else { dim };
        Ok(Ensemble {
            n,
            dim,
            kinetic,
            state: vec![T::zero(); n * stride],
            dt,
            step: 0,
            seed,
        })
    }

    /// Ensemble shaped for `gen`, started from `law`. Stationary starts sample `μ` on `mu`'s grid.
    pub fn for_generator(
        gen: &Generator<T>,
        n: usize,
        dt: T,
        seed: u64,
        law: &InitialLaw<T>,
        mu: Option<&GibbsMeasure<T>>,
    ) -> Result<Self, MonteCarloError> {
        let (dim, kinetic) = match gen {
            Generator::Overdamped(p) => (p.dim(), false),
            Generator::Kinetic(p) => (p.dim(), true),
            Generator::Diffusion { sigma, .. } => (sigma.len(), false),
        };
        let mut e = Self::new(n, dim, kinetic, dt, seed)?;
        e.initialise(law, mu)?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_kinetic(&self) -> bool {
        self.kinetic
    }

    pub fn stride(&self) -> usize {
        if self.kinetic {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> T {
        self.dt * T::lit(self.step as f64)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn particle(&self, p: usize) -> &[T] {
        let s = self.stride();
        &self.state[p * s..(p + 1) * s]
    }

    pub fn state(&self) -> &[T] {
        &self.state
    }

    pub fn set_particle(&mut self, p: usize, values: &[T]) {
        let s = self.stride();
        self.state[p * s..(p + 1) * s].copy_from_slice(values);
    }

    fn initialise(&mut self, law: &InitialLaw<T>, mu: Option<&GibbsMeasure<T>>) -> Result<(), MonteCarloError> {
        let stride = self.stride();
        // the last stream is reserved for initial draws
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(u64::MAX);
        match law {
            InitialLaw::Stationary => {
                let mu = mu.ok_or_else(|| MonteCarloError::InvalidInput("stationary start needs a measure".into()))?;
                if self.dim != 1 {
                    return Err(MonteCarloError::InvalidInput("stationary start is 1D only".into()));
                }
                let xs = sample_1d(mu, self.n, self.seed ^ 0x5DEE_CE66_D1CE_5EED)?;
                let half = T::lit(0.5).sqrt();
                for (p, x) in xs.into_iter().enumerate() {
                    self.state[p * stride] = x;
                    if self.kinetic {
                        let z: f64 = rng.sample(StandardNormal);
                        self.state[p * stride + 1] = T::lit(z) * half;
                    }
                }
            }
            InitialLaw::Gaussian { centre, sigma } => {
                if centre.len() != stride {
                    return Err(MonteCarloError::InvalidInput(format!(
                        "Gaussian centre has {} coordinates, state has {stride}",
                        centre.len()
                    )));
                }
                for p in 0..self.n {
                    for k in 0..stride {
                        let z: f64 = rng.sample(StandardNormal);
                        self.state[p * stride + k] = centre[k] + *sigma * T::lit(z);
                    }
                }
            }
            InitialLaw::HeavyTailed { a } => {
                if !(self.kinetic && self.dim == 1 && *a > T::zero()) {
                    return Err(MonteCarloError::InvalidInput(
                        "heavy-tailed start needs a 1D kinetic ensemble and a > 0".into(),
                    ));
                }
                for p in 0..self.n {
                    // r² = (1 − U)^{−1/a} − 1, uniform angle
                    let u: f64 = rng.random();
                    let th: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                    let r = ((T::one() - T::lit(u)).powf(-T::one() / *a) - T::one()).sqrt();
                    self.state[p * stride] = r * T::lit(th.cos());
                    self.state[p * stride + 1] = r * T::lit(th.sin());
                }
            }
        }
        Ok(())
    }

    /// `steps` Euler–Maruyama steps of `gen`.
    pub fn advance(&mut self, gen: &Generator<T>, steps: u64) -> Result<(), MonteCarloError> {
        check_generator(gen, self.dim, self.kinetic)?;
        let stride = self.stride();
        let (seed, step0, dt) = (self.seed, self.step, self.dt);
        // earliest failure by (step, particle), independent of scheduling
        let res = self.state.par_chunks_mut(stride).enumerate().map(|(p, s)| {
            let mut rng = particle_rng(seed, p);
            let mut z = vec![T::zero(); noise_dim(gen, s.len())];
            for j in 0..steps {
                let k = step0 + j;
                draw(&mut rng, k, &mut z);
                euler_step(gen, s, &z, dt)?;
                if s.iter().any(|v| !v.is_finite()) {
                    return Err(MonteCarloError::NonFinite { particle: p, step: k + 1 });
                }
            }
            Ok(())
        });
        let first = res
            .filter_map(|r| r.err())
            .min_by_key(|e| match e {
                MonteCarloError::NonFinite { particle, step } => (*step, *particle),
                _ => (0, 0),
            });
        if let Some(e) = first {
            return Err(e);
        }
        self.step += steps;
        Ok(())
    }
}

fn check_generator<T: Real>(gen: &Generator<T>, dim: usize, kinetic: bool) -> Result<(), MonteCarloError> {
    let ok = match gen {
        Generator::Overdamped(p) => !kinetic && p.dim() == dim,
        Generator::Kinetic(p) => kinetic && p.dim() == dim,
        Generator::Diffusion { sigma, .. } => !kinetic && sigma.len() == dim,
    };
    if ok {
        Ok(())
    } else {
        Err(MonteCarloError::InvalidInput("generator does not match the ensemble shape".into()))
    }
}

fn noise_dim<T: Real>(gen: &Generator<T>, stride: usize) -> usize {
    match gen {
        Generator::Kinetic(_) => stride / 2,
        _ => stride,
    }
}

pub(crate) fn particle_rng(seed: u64, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    rng
}

pub(crate) fn draw<T: Real>(rng: &mut ChaCha8Rng, step: u64, z: &mut [T]) {
    rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    for v in z.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *v = T::lit(g);
    }
}

/// One Euler–Maruyama step in place.
pub(crate) fn euler_step<T: Real>(gen: &Generator<T>, s: &mut [T], z: &[T], dt: T) -> Result<(), EvalError> {
    let sq = dt.sqrt();
    match gen {
        Generator::Overdamped(pot) => {
            let g = grad(pot, s)?;
            for i in 0..s.len() {
                s[i] = s[i] - g[i] * dt + sq * z[i];
            }
        }
        Generator::Kinetic(pot) => {
            let d = s.len() / 2;
            let g = grad(pot, &s[..d])?;
            for i in 0..d {
                let (x, v) = (s[i], s[d + i]);
                s[i] = x + v * dt;
                s[d + i] = v - (v + g[i]) * dt + sq * z[i];
            }
        }
        Generator::Diffusion { sigma, drift } => {
            let b: Vec<T> = drift.iter().map(|e| e.eval(s)).collect();
            for i in 0..s.len() {
                s[i] = s[i] + b[i] * dt + sigma[i] * sq * z[i];
            }
        }
    }
    Ok(())
}

fn grad<T: Real>(pot: &Potential<T>, x: &[T]) -> Result<Vec<T>, EvalError> {
    // closed forms for the hot 1D cases, avoiding the Hessian
    if x.len() == 1 {
        match pot.form() {
            PotentialForm::Quadratic { kappa } => return Ok(vec![*kappa * x[0]]),
            PotentialForm::Power { p, delta } => {
                let s = *delta * *delta + x[0] * x[0];
                return Ok(vec![*p * x[0] * s.powf(*p * T::lit(0.5) - T::one())]);
            }
            _ => {}
        }
    }
    pot.grad(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::sum_compensated;

    #[test]
    fn brownian_variance() {
        let gen = Generator::diffusion(None, vec![crate::Expr::Num(0.0)]);
        let mut e = Ensemble::new(20000, 1, false, 1e-2f64, 7).unwrap();
        e.advance(&gen, 100).unwrap();
        let t = e.time();
        let var = sum_compensated(e.state().iter().map(|x| x * x)) / e.len() as f64;
        assert!((var / t - 1.0).abs() < 0.03, "{}", var / t);
    }

    #[test]
    fn ou_stationary_mean_and_kinetic_velocity() {
        let q = Potential::quadratic(1, 1.0f64);
        let mu = GibbsMeasure::normalize(&q, 8.0, 2001).unwrap();
        let n = 4000;
        let mut e = Ensemble::for_generator(&Generator::overdamped(q.clone()), n, 1e-2, 3, &InitialLaw::Stationary, Some(&mu)).unwrap();
        for _ in 0..5 {
            e.advance(&Generator::overdamped(q.clone()), 100).unwrap();
            let m = sum_compensated(e.state().iter().copied()) / n as f64;
            assert!(m.abs() < 3.0 * (0.5f64 / n as f64).sqrt());
        }
        let gen = Generator::kinetic(q.clone());
        let mut k = Ensemble::for_generator(&gen, n, 5e-3, 5, &InitialLaw::Stationary, Some(&mu)).unwrap();
        for _ in 0..4 {
            k.advance(&gen, 200).unwrap();
            let v2 = sum_compensated((0..n).map(|p| k.particle(p)[1].powi(2))) / n as f64;
            assert!((v2 - 0.5).abs() < 0.05, "{v2}");
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let q = Potential::power(1, 1.5f64, 0.1);
        let gen = Generator::overdamped(q);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let law = InitialLaw::Gaussian { centre: vec![1.0], sigma: 0.3 };
                let mut e = Ensemble::for_generator(&gen, 257, 1e-2, 99, &law, None).unwrap();
                e.advance(&gen, 50).unwrap();
                e.advance(&gen, 25).unwrap();
                e.state().to_vec()
            })
        };
        let a = run(1);
        let b = run(8);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        // split advances equal one long advance
        let law = InitialLaw::Gaussian { centre: vec![1.0], sigma: 0.3 };
        let mut e = Ensemble::for_generator(&gen, 257, 1e-2, 99, &law, None).unwrap();
        e.advance(&gen, 75).unwrap();
        assert!(e.state().iter().zip(&a).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn blow_up_is_reported() {
        let gen = Generator::overdamped(Potential::power(1, 4.0f64, 0.0));
        let mut e = Ensemble::new(3, 1, false, 0.05, 1).unwrap();
        e.set_particle(2, &[50.0]);
        match e.advance(&gen, 20) {
            Err(MonteCarloError::NonFinite { particle, .. }) => assert_eq!(particle, 2),
            other => panic!("{other:?}"),
        }
    }
}
