//! Grid-level ground truth: discretised generators, spectral gaps, Muckenhoupt and local
//! Poincaré constants, and exact semigroup evolution.

pub mod eigen;
mod evolve;
mod kinetic;
mod poincare;

pub use evolve::{fmt17, semigroup_evolve, EvolveMode, EvolveOptions, SemigroupTrace};
pub use kinetic::{shifted_gaussian_density, Kinetic2d, MAX_KINETIC_NODES};
pub use poincare::{
    detect_no_poincare, local_poincare, muckenhoupt, spectral_gap, DivergenceReport, LocalPoincare,
    MuckenhouptReport, SpectralReport,
};

use thiserror::Error;

use crate::error::EvalError;
use crate::generators::Generator;
use crate::potentials::{MeasureError, Potential};
use crate::scalar::{linspace, weighted_linear_fit};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("unsupported generator or dimension: {0}")]
    Unsupported(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("subset {lo}..{hi} is not inside the box [-{half_width}, {half_width}]")]
    SubsetOutsideBox { lo: f64, hi: f64, half_width: f64 },
    #[error("negative density {min} at node {index}, t = {t}")]
    NegativeDensity { t: f64, min: f64, index: usize },
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Conservative, μ-symmetric finite-volume discretisation of `½f'' − F'f'` on
/// `[-R, R]` with zero-flux walls.
///
/// Nodes are `n` equispaced vertices. Node masses are `e^{-2F}h` (halved at the walls) and the
/// conductance of edge `i ↔ i+1` is `½e^{-2F(midpoint)}/h`, both normalised by total mass, so
/// `(Af)_i = Σ_j c_ij (f_j − f_i) / m_i`.
#[derive(Debug, Clone)]
pub struct Reversible1d<T> {
    potential: Potential<T>,
    half_width: T,
    nodes: Vec<T>,
    mass: Vec<T>,
    cond: Vec<T>,
}

impl<T: Real> Reversible1d<T> {
    pub fn new(potential: &Potential<T>, half_width: T, n: usize) -> Result<Self, SpectralError> {
        if potential.dim() != 1 {
            return Err(SpectralError::Unsupported(format!(
                "overdamped discretisation needs d = 1, got {}",
                potential.dim()
            )));
        }
        if n < 3 || !(half_width > T::zero()) {
            return Err(SpectralError::InvalidGrid(format!("n = {n}, R = {half_width}")));
        }
        let nodes = linspace(-half_width, half_width, n);
        let h = nodes[1] - nodes[0];
        let fv: Vec<T> = nodes
            .iter()
            .map(|x| potential.value(std::slice::from_ref(x)))
            .collect::<Result<_, _>>()?;
        let fm: Vec<T> = nodes
            .windows(2)
            .map(|w| potential.value(&[(w[0] + w[1]) * T::lit(0.5)]))
            .collect::<Result<_, _>>()?;
        let fmin = fv.iter().chain(&fm).copied().fold(T::infinity(), T::min);
        let two = T::lit(2.0);
        let mut mass: Vec<T> = fv.iter().map(|f| (-two * (*f - fmin)).exp() * h).collect();
        mass[0] *= T::lit(0.5);
        mass[n - 1] *= T::lit(0.5);
        let mut cond: Vec<T> = fm.iter().map(|f| T::lit(0.5) * (-two * (*f - fmin)).exp() / h).collect();
        if mass.iter().chain(&cond).any(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(SpectralError::InvalidGrid(format!(
                "e^(-2F) under- or overflows on [-{half_width}, {half_width}]; shrink the box"
            )));
        }
        let total = crate::scalar::sum_compensated(mass.iter().copied());
        mass.iter_mut().for_each(|m| *m /= total);
        cond.iter_mut().for_each(|c| *c /= total);
        Ok(Reversible1d {
            potential: potential.clone(),
            half_width,
            nodes,
            mass,
            cond,
        })
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Probability weights of the nodes.
    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    /// Edge conductances `c_{i,i+1}`.
    pub fn conductances(&self) -> &[T] {
        &self.cond
    }

    /// `(lower, diag, upper)` of `A`: `lower[i] = A[i][i-1]`, `upper[i] = A[i][i+1]`.
    pub fn tridiagonal(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.len();
        let mut lower = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        for i in 0..n {
            if i > 0 {
                lower[i] = self.cond[i - 1] / self.mass[i];
            }
            if i + 1 < n {
                upper[i] = self.cond[i] / self.mass[i];
            }
            diag[i] = -(lower[i] + upper[i]);
        }
        (lower, diag, upper)
    }

    pub fn apply(&self, f: &[T], out: &mut [T]) {
        let n = self.len();
        for i in 0..n {
            let mut s = T::zero();
            if i > 0 {
                s += self.cond[i - 1] * (f[i - 1] - f[i]);
            }
            if i + 1 < n {
                s += self.cond[i] * (f[i + 1] - f[i]);
            }
            out[i] = s / self.mass[i];
        }
    }

    /// Dirichlet form `Σ c_e (Δf)² = ∫ −f A f dμ`.
    pub fn energy(&self, f: &[T]) -> T {
        crate::scalar::sum_compensated(
            self.cond
                .iter()
                .enumerate()
                .map(|(i, c)| *c * (f[i + 1] - f[i]) * (f[i + 1] - f[i])),
        )
    }

    /// `max_i |Σ_j A_ij|`.
    pub fn row_sum_defect(&self) -> T {
        let (l, d, u) = self.tridiagonal();
        (0..self.len())
            .map(|i| (l[i] + d[i] + u[i]).abs())
            .fold(T::zero(), T::max)
    }

    /// `max |W A − Aᵀ W|` with `W = diag(mass)`.
    pub fn symmetry_defect(&self) -> T {
        let (l, _, u) = self.tridiagonal();
        (0..self.len() - 1)
            .map(|i| (self.mass[i] * u[i] - self.mass[i + 1] * l[i + 1]).abs())
            .fold(T::zero(), T::max)
    }

    pub fn min_off_diagonal(&self) -> T {
        let (l, _, u) = self.tridiagonal();
        l[1..].iter().chain(&u[..self.len() - 1]).copied().fold(T::infinity(), T::min)
    }
}

#[derive(Debug, Clone)]
pub enum DiscretizedGenerator<T> {
    Reversible1d(Reversible1d<T>),
    Kinetic2d(Box<Kinetic2d<T>>),
}

/// Discretises an overdamped generator (`d = 1`, box `[-R, R]`, `n` nodes) or a kinetic one
/// (`d = 1`, box `[-R_x, R_x] × [-R_v, R_v]`, `n × n` cells; pass `half_widths = [R_x, R_v]`).
pub fn discretize<T: Real>(
    generator: &Generator<T>,
    half_widths: &[T],
    n: usize,
) -> Result<DiscretizedGenerator<T>, SpectralError> {
    match generator {
        Generator::Overdamped(f) => {
            let r = *half_widths
                .first()
                .ok_or_else(|| SpectralError::InvalidGrid("missing box".into()))?;
            Ok(DiscretizedGenerator::Reversible1d(Reversible1d::new(f, r, n)?))
        }
        Generator::Kinetic(f) => {
            if half_widths.len() != 2 {
                return Err(SpectralError::InvalidGrid("kinetic box needs [R_x, R_v]".into()));
            }
            Ok(DiscretizedGenerator::Kinetic2d(Box::new(Kinetic2d::new(
                f,
                half_widths[0],
                half_widths[1],
                n,
                n,
            )?)))
        }
        Generator::Diffusion { .. } => Err(SpectralError::Unsupported(
            "general diffusions have no grid oracle".into(),
        )),
    }
}

/// Exponential rate fitted to `log y` over the window where `y ∈ [lo, hi] · y(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowFit<T> {
    pub rate: T,
    pub t_start: T,
    pub t_end: T,
    pub points: usize,
    pub r_squared: T,
}

pub fn fit_decay_window<T: Real>(times: &[T], values: &[T], lo: T, hi: T) -> Option<WindowFit<T>> {
    let y0 = values.first().copied()?;
    if !(y0 > T::zero()) {
        return None;
    }
    let (mut t, mut y) = (Vec::new(), Vec::new());
    for (ti, vi) in times.iter().zip(values) {
        let r = *vi / y0;
        if r >= lo && r <= hi && *vi > T::zero() {
            t.push(*ti);
            y.push(vi.ln());
        }
    }
    if t.len() < 3 {
        return None;
    }
    let w = vec![T::one(); t.len()];
    let fit = weighted_linear_fit(&t, &y, &w)?;
    Some(WindowFit {
        rate: -fit.slope,
        t_start: t[0],
        t_end: t[t.len() - 1],
        points: t.len(),
        r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_matrix_structure() {
        let d = Reversible1d::new(&Potential::quadratic(1, 1.0f64), 8.0, 1601).unwrap();
        assert!(d.row_sum_defect() < 1e-10);
        assert!(d.symmetry_defect() < 1e-10);
        assert!(d.min_off_diagonal() >= 0.0);
        let ones = vec![1.0; d.len()];
        let mut out = vec![0.0; d.len()];
        d.apply(&ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-10));
        let s: f64 = d.mass().iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn consistent_with_generator() {
        let pot = Potential::power(1, 1.5f64, 0.1);
        let d = Reversible1d::new(&pot, 5.0, 2001).unwrap();
        let f: Vec<f64> = d.nodes().iter().map(|x| x.sin()).collect();
        let mut out = vec![0.0; d.len()];
        d.apply(&f, &mut out);
        for i in [300usize, 1000, 1700] {
            let x = d.nodes()[i];
            let g = pot.grad(&[x]).unwrap()[0];
            let exact = -0.5 * x.sin() - g * x.cos();
            assert!((out[i] - exact).abs() < 1e-4, "{x}: {} {exact}", out[i]);
        }
    }

    #[test]
    fn kinetic_rejects_wrong_box() {
        let g = Generator::kinetic(Potential::quadratic(1, 1.0f64));
        assert!(matches!(discretize(&g, &[6.0], 41), Err(SpectralError::InvalidGrid(_))));
        let g2 = Generator::overdamped(Potential::quadratic(2, 1.0f64));
        assert!(matches!(discretize(&g2, &[6.0], 41), Err(SpectralError::Unsupported(_))));
    }

    #[test]
    fn window_fit_on_exponential() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay_window(&t, &y, 1e-8, 1e-2).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-10);
        assert!(fit.t_start > 2.0 && fit.t_end < 10.0);
    }
}
