use rayon::prelude::*;

use super::{draw, euler_step, particle_rng, Ensemble, MonteCarloError};
use crate::generators::Generator;
use crate::potentials::GibbsMeasure;
use crate::quadrature::gauss_legendre;
use crate::rates::psi_sobolev;
use crate::scalar::sum_compensated;
use crate::Real;

/// Number of sub-ensembles (or path batches) behind every standard error.
pub const BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Variance,
    Entropy,
    TotalVariation,
    PsiFunctional,
    Autocovariance,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Variance => "variance",
            TraceKind::Entropy => "entropy",
            TraceKind::TotalVariation => "tv",
            TraceKind::PsiFunctional => "psi",
            TraceKind::Autocovariance => "autocovariance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace<T> {
    pub kind: TraceKind,
    pub times: Vec<T>,
    pub values: Vec<T>,
    /// Batch-means standard errors.
    pub stderr: Vec<T>,
    pub notes: Vec<String>,
}

impl<T: Real> DecayTrace<T> {
    fn new(kind: TraceKind) -> Self {
        DecayTrace {
            kind,
            times: Vec::new(),
            values: Vec::new(),
            stderr: Vec::new(),
            notes: Vec::new(),
        }
    }
}

fn mean_se<T: Real>(xs: &[T]) -> T {
    let n = T::from_usize_lossy(xs.len());
    let m = sum_compensated(xs.iter().copied()) / n;
    let var = sum_compensated(xs.iter().map(|x| (*x - m) * (*x - m))) / (n - T::one());
    (var / n).sqrt()
}

/// Stationary autocovariance `Cov(f(X_0), f(X_t))` along one long overdamped path.
///
/// `lags` are rounded to whole steps; standard errors come from [`BATCHES`] contiguous path segments.
#[allow(clippy::too_many_arguments)]
pub fn autocovariance_trace<T: Real, F: Fn(&[T]) -> T>(
    gen: &Generator<T>,
    f: F,
    x0: &[T],
    dt: T,
    horizon: T,
    lags: &[T],
    seed: u64,
) -> Result<DecayTrace<T>, MonteCarloError> {
    let Generator::Overdamped(pot) = gen else {
        return Err(MonteCarloError::InvalidInput(
            "autocovariance needs a reversible (overdamped) generator".into(),
        ));
    };
    if x0.len() != pot.dim() || !(dt > T::zero() && horizon > dt) {
        return Err(MonteCarloError::InvalidInput("bad start point, dt or horizon".into()));
    }
    let steps = (horizon / dt).round().to_usize().unwrap_or(0);
    let lag_steps: Vec<usize> = lags.iter().map(|l| (*l / dt).round().to_usize().unwrap_or(0)).collect();
    let max_lag = lag_steps.iter().copied().max().unwrap_or(0);
    if steps < BATCHES * (max_lag + 2) {
        return Err(MonteCarloError::InvalidInput("horizon too short for the largest lag".into()));
    }
    let mut x = x0.to_vec();
    let mut rng = particle_rng(seed, 0);
    let mut z = vec![T::zero(); x.len()];
    let mut vals = Vec::with_capacity(steps + 1);
    vals.push(f(&x));
    for k in 0..steps as u64 {
        draw(&mut rng, k, &mut z);
        euler_step(gen, &mut x, &z, dt)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(MonteCarloError::NonFinite { particle: 0, step: k + 1 });
        }
        vals.push(f(&x));
    }
    let mean = sum_compensated(vals.iter().copied()) / T::from_usize_lossy(vals.len());
    let c: Vec<T> = vals.iter().map(|v| *v - mean).collect();
    let seg = c.len() / BATCHES;
    let mut tr = DecayTrace::new(TraceKind::Autocovariance);
    let per_lag: Vec<(T, T)> = lag_steps
        .par_iter()
        .map(|&l| {
            let whole = sum_compensated((0..c.len() - l).map(|i| c[i] * c[i + l])) / T::from_usize_lossy(c.len() - l);
            let parts: Vec<T> = (0..BATCHES)
                .map(|b| {
                    let lo = b * seg;
                    let hi = ((b + 1) * seg).min(c.len() - l);
                    sum_compensated((lo..hi).map(|i| c[i] * c[i + l])) / T::from_usize_lossy(hi - lo)
                })
                .collect();
            (whole, mean_se(&parts))
        })
        .collect();
    for (l, (v, se)) in lag_steps.iter().zip(per_lag) {
        tr.times.push(dt * T::from_usize_lossy(*l));
        tr.values.push(v);
        tr.stderr.push(se);
    }
    tr.notes.push(format!("path steps {steps}, dt {dt}"));
    Ok(tr)
}

/// Histogram over `[-R, R]` per axis (positions, then velocities for kinetic ensembles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramSpec<T> {
    pub bins: usize,
    pub half_width_x: T,
    pub half_width_v: T,
}

impl<T: Real> HistogramSpec<T> {
    pub fn new(bins: usize, half_width_x: T, half_width_v: T) -> Self {
        HistogramSpec {
            bins,
            half_width_x,
            half_width_v,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityTraces<T> {
    pub entropy: DecayTrace<T>,
    pub tv: DecayTrace<T>,
    pub psi: DecayTrace<T>,
    /// Miller–Madow estimate `(occupied bins − 1)/(2n)` of the plug-in entropy bias, per time.
    pub entropy_bias: Vec<T>,
}

fn bin_masses<T: Real, D: Fn(T) -> T>(density: D, lo: T, hi: T, bins: usize) -> Vec<T> {
    let (gx, gw) = gauss_legendre::<T>(8);
    let h = (hi - lo) / T::from_usize_lossy(bins);
    (0..bins)
        .map(|i| {
            let a = lo + h * T::from_usize_lossy(i);
            let half = h * T::lit(0.5);
            let mid = a + half;
            gx.iter().zip(&gw).map(|(x, w)| *w * half * density(mid + half * *x)).sum()
        })
        .collect()
}

fn bin_index<T: Real>(x: T, r: T, bins: usize) -> Option<usize> {
    if !(x >= -r && x < r) {
        return None;
    }
    let i = ((x + r) / (T::lit(2.0) * r) * T::from_usize_lossy(bins)).floor().to_usize()?;
    Some(i.min(bins - 1))
}

struct Functionals<T> {
    entropy: T,
    tv: T,
    psi: T,
    occupied: usize,
    empty_mass: T,
}

fn functionals<T: Real>(counts: &[usize], n: usize, q: &[T], wbar: &[T]) -> Functionals<T> {
    let nn = T::from_usize_lossy(n);
    let mut ent = Vec::with_capacity(q.len());
    let mut tv = Vec::with_capacity(q.len());
    let mut psi = Vec::with_capacity(q.len());
    let mut inside = T::zero();
    let mut occupied = 0;
    let mut empty_mass = T::zero();
    for (i, &c) in counts.iter().enumerate() {
        let p = T::from_usize_lossy(c) / nn;
        inside += p;
        if c > 0 {
            occupied += 1;
            ent.push(p * (p / q[i]).ln());
        } else {
            empty_mass += q[i];
        }
        tv.push((p - q[i]).abs());
        if q[i] > T::zero() {
            psi.push(psi_sobolev(p / q[i]) * q[i] * wbar[i]);
        }
    }
    let q_in = sum_compensated(q.iter().copied());
    let outside = (T::one() - inside).max(T::zero()) + (T::one() - q_in).max(T::zero());
    Functionals {
        entropy: sum_compensated(ent),
        tv: ((sum_compensated(tv) + outside) * T::lit(0.5)).min(T::one()),
        psi: sum_compensated(psi),
        occupied,
        empty_mass,
    }
}

/// Histogram entropy, total variation and `Ψ`-functional of the ensemble law against `μ`
/// at each of `times`. `mu` is the position marginal; kinetic velocities use `e^{-|v|²}`.
/// `weight` is averaged per bin in the `Ψ`-functional (1 when absent).
pub fn ensemble_density_trace<T: Real>(
    gen: &Generator<T>,
    ens: &mut Ensemble<T>,
    mu: &GibbsMeasure<T>,
    spec: &HistogramSpec<T>,
    times: &[T],
    weight: Option<&(dyn Fn(&[T]) -> T + Sync)>,
) -> Result<DensityTraces<T>, MonteCarloError> {
    if ens.dim() != 1 || mu.dim() != 1 || spec.bins < 2 {
        return Err(MonteCarloError::InvalidInput("density traces are 1D in position, bins >= 2".into()));
    }
    if ens.len() < BATCHES {
        return Err(MonteCarloError::InvalidInput(format!("need at least {BATCHES} particles")));
    }
    let nb = spec.bins;
    let qx = bin_masses(|x| mu.density(&[x]).unwrap_or(T::zero()), -spec.half_width_x, spec.half_width_x, nb);
    let kinetic = ens.is_kinetic();
    let q: Vec<T> = if kinetic {
        let sqrt_pi = T::PI().sqrt();
        let qv = bin_masses(|v| (-v * v).exp() / sqrt_pi, -spec.half_width_v, spec.half_width_v, nb);
        qx.iter().flat_map(|a| qv.iter().map(move |b| *a * *b)).collect()
    } else {
        qx
    };
    // bin-averaged weight from Gauss points
    let wbar: Vec<T> = match weight {
        None => vec![T::one(); q.len()],
        Some(w) => {
            let hx = T::lit(2.0) * spec.half_width_x / T::from_usize_lossy(nb);
            let hv = T::lit(2.0) * spec.half_width_v / T::from_usize_lossy(nb);
            (0..q.len())
                .map(|k| {
                    let (i, j) = if kinetic { (k / nb, k % nb) } else { (k, 0) };
                    let x = -spec.half_width_x + hx * (T::from_usize_lossy(i) + T::lit(0.5));
                    if kinetic {
                        let v = -spec.half_width_v + hv * (T::from_usize_lossy(j) + T::lit(0.5));
                        w(&[x, v])
                    } else {
                        w(&[x])
                    }
                })
                .collect()
        }
    };

    let mut out = DensityTraces {
        entropy: DecayTrace::new(TraceKind::Entropy),
        tv: DecayTrace::new(TraceKind::TotalVariation),
        psi: DecayTrace::new(TraceKind::PsiFunctional),
        entropy_bias: Vec::new(),
    };
    let n = ens.len();
    let group = n / BATCHES;
    let mut warned = false;
    for &t in times {
        let target = (t / ens.dt()).round().to_u64().unwrap_or(0);
        if target < ens.steps_taken() {
            return Err(MonteCarloError::InvalidInput("times must be increasing".into()));
        }
        ens.advance(gen, target - ens.steps_taken())?;
        let idx: Vec<Option<usize>> = (0..n)
            .into_par_iter()
            .map(|p| {
                let s = ens.particle(p);
                let i = bin_index(s[0], spec.half_width_x, nb)?;
                if kinetic {
                    Some(i * nb + bin_index(s[1], spec.half_width_v, nb)?)
                } else {
                    Some(i)
                }
            })
            .collect();
        let hist = |range: std::ops::Range<usize>| {
            let mut c = vec![0usize; q.len()];
            for k in idx[range].iter().flatten() {
                c[*k] += 1;
            }
            c
        };
        let all = functionals(&hist(0..n), n, &q, &wbar);
        let parts: Vec<Functionals<T>> = (0..BATCHES)
            .map(|b| functionals(&hist(b * group..(b + 1) * group), group, &q, &wbar))
            .collect();
        // sub-ensemble spread scaled to the full ensemble
        let se = |g: &dyn Fn(&Functionals<T>) -> T| {
            let v: Vec<T> = parts.iter().map(g).collect();
            mean_se(&v)
        };
        let time = ens.time();
        out.entropy.times.push(time);
        out.entropy.values.push(all.entropy);
        out.entropy.stderr.push(se(&|f| f.entropy));
        out.tv.times.push(time);
        out.tv.values.push(all.tv);
        out.tv.stderr.push(se(&|f| f.tv));
        out.psi.times.push(time);
        out.psi.values.push(all.psi);
        out.psi.stderr.push(se(&|f| f.psi));
        out.entropy_bias
            .push(T::from_usize_lossy(all.occupied.saturating_sub(1)) / (T::lit(2.0) * T::from_usize_lossy(n)));
        if all.empty_mass > T::lit(0.2) && !warned {
            warned = true;
            out.entropy
                .notes
                .push(format!("empty bins carry mu-mass {} at t = {time}; widen the bins", all.empty_mass));
        }
    }
    Ok(out)
}
