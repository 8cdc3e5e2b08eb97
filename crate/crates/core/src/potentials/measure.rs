use thiserror::Error;

use super::{Potential, PotentialForm};
use crate::error::EvalError;
use crate::quadrature::{integrate_to_infinity, simpson_weights};
use crate::scalar::{linspace, sum_compensated};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("quadrature supports d <= 2, got d = {0}")]
    DimensionTooLarge(usize),
    #[error("e^(-2F) does not look integrable: {0}")]
    NotIntegrable(String),
    #[error("operation requires d = 1, got d = {0}")]
    NotOneDimensional(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Whether the measure lives on all of `R^d` (box is a truncation) or on the box itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    WholeSpace,
    Box,
}

/// `μ = Z⁻¹ e^{-2F}` discretised on a tensor grid over `Π[-R_k, R_k]`.
#[derive(Debug, Clone)]
pub struct GibbsMeasure<T> {
    potential: Potential<T>,
    domain: Domain,
    half_widths: Vec<T>,
    axes: Vec<Vec<T>>,
    weights: Vec<T>,
    z: T,
    z_box: T,
    tail_mass: T,
    tail_known: bool,
    quad_error: T,
}

/// Rounds `n` up to `1 (mod 4)` so that the centre node is a Simpson panel boundary.
fn round_nodes(n: usize) -> usize {
    let n = n.max(5);
    n + (4 - (n - 1) % 4) % 4
}

impl<T: Real> GibbsMeasure<T> {
    /// Measure on `R^d`, integrated on `[-R, R]^d` plus an analytic tail for builtins.
    pub fn normalize(potential: &Potential<T>, half_width: T, n: usize) -> Result<Self, MeasureError> {
        let hw = vec![half_width; potential.dim()];
        Self::build(potential, &hw, n, Domain::WholeSpace)
    }

    /// Measure restricted to the box (reflecting walls), no tail.
    pub fn normalize_on_box(potential: &Potential<T>, half_width: T, n: usize) -> Result<Self, MeasureError> {
        let hw = vec![half_width; potential.dim()];
        Self::build(potential, &hw, n, Domain::Box)
    }

    /// General constructor with per-axis half widths. `n` is rounded up to `1 (mod 4)`.
    pub fn build(
        potential: &Potential<T>,
        half_widths: &[T],
        n: usize,
        domain: Domain,
    ) -> Result<Self, MeasureError> {
        let d = potential.dim();
        if d > 2 {
            return Err(MeasureError::DimensionTooLarge(d));
        }
        if half_widths.len() != d || half_widths.iter().any(|r| !(*r > T::zero())) {
            return Err(MeasureError::InvalidGrid("one positive half width per axis".into()));
        }
        let n = round_nodes(n);
        if n.pow(d as u32) > 40_000_000 {
            return Err(MeasureError::InvalidGrid(format!("{n}^{d} nodes is too many")));
        }
        let axes: Vec<Vec<T>> = half_widths.iter().map(|&r| linspace(-r, r, n)).collect();
        let total = n.pow(d as u32);
        let mut f = Vec::with_capacity(total);
        let mut point = vec![T::zero(); d];
        for k in 0..total {
            fill_point(&axes, n, k, &mut point);
            f.push(potential.value(&point)?);
        }
        let fmin = f.iter().copied().fold(T::infinity(), T::min);
        let two = T::lit(2.0);
        let rho: Vec<T> = f.iter().map(|&v| (-two * (v - fmin)).exp()).collect();
        let scale = (-two * fmin).exp();

        let integrate = |stride: usize| -> T {
            let m = (n - 1) / stride + 1;
            let ws: Vec<Vec<T>> = axes
                .iter()
                .map(|ax| simpson_weights(m, (ax[1] - ax[0]) * T::from_usize_lossy(stride)))
                .collect();
            match d {
                1 => sum_compensated((0..m).map(|i| ws[0][i] * rho[i * stride])),
                _ => sum_compensated((0..m).flat_map(|i| {
                    let ws = &ws;
                    let rho = &rho;
                    (0..m).map(move |j| ws[0][i] * ws[1][j] * rho[i * stride * n + j * stride])
                })),
            }
        };
        let fine = integrate(1);
        let coarse = integrate(2);
        let quad_error = (fine - coarse).abs() / T::lit(15.0) * scale;
        let z_box = fine * scale;
        if !(z_box > T::zero()) || !z_box.is_finite() {
            return Err(MeasureError::NotIntegrable(format!("box integral is {z_box}")));
        }
        if (fine - coarse).abs() > T::lit(1e-2) * fine {
            return Err(MeasureError::NotIntegrable(format!(
                "box integral changes by {} under grid refinement",
                ((fine - coarse) / fine).abs()
            )));
        }

        let (tail_mass, tail_known) = match domain {
            Domain::Box => (T::zero(), true),
            Domain::WholeSpace => match tail_estimate(potential, half_widths, z_box) {
                Some(t) if t.is_finite() => (t, true),
                Some(_) => {
                    return Err(MeasureError::NotIntegrable("tail integral diverges".into()));
                }
                None => {
                    edge_decay_check(&axes, n, &rho, fine)?;
                    (T::zero(), false)
                }
            },
        };
        let z = z_box + tail_mass;

        let mut weights = Vec::with_capacity(total);
        let ws: Vec<Vec<T>> = axes.iter().map(|ax| simpson_weights(n, ax[1] - ax[0])).collect();
        for k in 0..total {
            let w = match d {
                1 => ws[0][k],
                _ => ws[0][k / n] * ws[1][k % n],
            };
            weights.push(w * rho[k] * scale / z);
        }
        Ok(GibbsMeasure {
            potential: potential.clone(),
            domain,
            half_widths: half_widths.to_vec(),
            axes,
            weights,
            z,
            z_box,
            tail_mass,
            tail_known,
            quad_error,
        })
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.axes[0].len()
    }

    pub fn half_widths(&self) -> &[T] {
        &self.half_widths
    }

    pub fn axis(&self, k: usize) -> &[T] {
        &self.axes[k]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Probability weights of the grid nodes (sum to `1 - tail_fraction`).
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn point(&self, k: usize) -> Vec<T> {
        let mut p = vec![T::zero(); self.dim()];
        fill_point(&self.axes, self.nodes_per_axis(), k, &mut p);
        p
    }

    pub fn z(&self) -> T {
        self.z
    }

    pub fn z_box(&self) -> T {
        self.z_box
    }

    /// Mass outside the box as a fraction of `Z`; zero with `tail_known() == false` for custom potentials.
    pub fn tail_fraction(&self) -> T {
        self.tail_mass / self.z
    }

    pub fn tail_known(&self) -> bool {
        self.tail_known
    }

    pub fn quad_error(&self) -> T {
        self.quad_error
    }

    pub fn density(&self, x: &[T]) -> Result<T, EvalError> {
        Ok((-T::lit(2.0) * self.potential.value(x)?).exp() / self.z)
    }

    /// `Σ w_k f(x_k)` over the box grid.
    pub fn expectation<F: Fn(&[T]) -> T>(&self, f: F) -> T {
        let mut p = vec![T::zero(); self.dim()];
        let n = self.nodes_per_axis();
        sum_compensated((0..self.len()).map(|k| {
            fill_point(&self.axes, n, k, &mut p);
            self.weights[k] * f(&p)
        }))
    }
}

fn fill_point<T: Real>(axes: &[Vec<T>], n: usize, k: usize, out: &mut [T]) {
    match axes.len() {
        1 => out[0] = axes[0][k],
        _ => {
            out[0] = axes[0][k / n];
            out[1] = axes[1][k % n];
        }
    }
}

/// Mass of `e^{-2F}` outside the box: exact for 1D radial builtins, a disk-complement
/// upper bound in 2D, a union bound for phase space. `None` for custom potentials.
fn tail_estimate<T: Real>(p: &Potential<T>, half_widths: &[T], z_box: T) -> Option<T> {
    let two = T::lit(2.0);
    let tol = T::lit(1e-15);
    match p.form() {
        PotentialForm::Custom(_) => None,
        PotentialForm::Quadratic { kappa } if *kappa == T::zero() => Some(T::infinity()),
        PotentialForm::PhaseSpace { position } => {
            if position.dim() != 1 {
                return None;
            }
            let (rx, rv) = (half_widths[0], half_widths[1]);
            let tx = tail_estimate(position, &[rx], z_box)?;
            let tv = two * integrate_to_infinity(|v: T| (-v * v).exp(), rv, T::one(), tol);
            let zv = T::PI().sqrt();
            Some(tx * zv + (z_box / zv) * tv)
        }
        PotentialForm::HeavyTail { p: pp } if p.dim() == 1 => {
            // ∫_R^∞ (1+r)^{-(1+p)} dr = (1+R)^{-p}/p on each side
            let r = half_widths[0];
            Some(two * (T::one() + r).powf(-*pp) / *pp)
        }
        _ => {
            let r = half_widths.iter().copied().fold(T::infinity(), T::min);
            let g = |s: T| p.radial_value(s).expect("radial builtin");
            let scale = r.max(T::one()) * T::lit(0.125);
            if p.dim() == 1 {
                Some(two * integrate_to_infinity(|s| (-two * g(s)).exp(), r, scale, tol))
            } else {
                Some(two * T::PI() * integrate_to_infinity(|s| s * (-two * g(s)).exp(), r, scale, tol))
            }
        }
    }
}

fn edge_decay_check<T: Real>(axes: &[Vec<T>], n: usize, rho: &[T], integral: T) -> Result<(), MeasureError> {
    let d = axes.len();
    let volume: T = axes.iter().map(|a| a[n - 1] - a[0]).fold(T::one(), |acc, w| acc * w);
    let total = n.pow(d as u32);
    let mut edge = T::zero();
    for k in 0..total {
        let on_edge = match d {
            1 => k == 0 || k == n - 1,
            _ => {
                let (i, j) = (k / n, k % n);
                i == 0 || j == 0 || i == n - 1 || j == n - 1
            }
        };
        if on_edge {
            edge = edge.max(rho[k]);
        }
    }
    if edge * volume > T::lit(1e-3) * integral {
        return Err(MeasureError::NotIntegrable(
            "density has not decayed at the box edge; enlarge the box".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_normalisation() {
        let m = GibbsMeasure::normalize(&Potential::quadratic(1, 1.0f64), 8.0, 2001).unwrap();
        assert!((m.z() - std::f64::consts::PI.sqrt()).abs() < 1e-8, "{}", m.z());
        let total: f64 = m.weights().iter().sum();
        assert!((total - (1.0 - m.tail_fraction())).abs() < 1e-12);
        let var = m.expectation(|x| x[0] * x[0]);
        assert!((var - 0.5).abs() < 1e-8);
    }

    #[test]
    fn exponential_normalisation() {
        let m = GibbsMeasure::normalize(&Potential::power(1, 1.0f64, 0.0), 15.0, 6001).unwrap();
        assert!((m.z() - 1.0).abs() < 1e-7, "{}", m.z());
        assert!(m.tail_known() && m.tail_fraction() > 0.0);
    }

    #[test]
    fn heavy_tail_extrapolation_is_stable() {
        let p = Potential::heavy_tail(1, 0.5f64);
        let a = GibbsMeasure::normalize(&p, 1e4, 4_000_001).unwrap().z();
        let b = GibbsMeasure::normalize(&p, 1e5, 4_000_001).unwrap().z();
        assert!(((a - b) / a).abs() < 1e-6, "{a} {b}");
        assert!((a - 4.0).abs() < 1e-5);
    }

    #[test]
    fn grid_convergence_within_error_estimate() {
        let p = Potential::power(1, 1.5f64, 0.1);
        let a = GibbsMeasure::normalize(&p, 10.0, 801).unwrap();
        let b = GibbsMeasure::normalize(&p, 10.0, 1601).unwrap();
        assert!((a.z() - b.z()).abs() < 4.0 * a.quad_error().max(1e-15));
    }

    #[test]
    fn two_dimensional_and_phase_space() {
        let m = GibbsMeasure::normalize(&Potential::quadratic(2, 1.0f64), 7.0, 401).unwrap();
        assert!((m.z() - std::f64::consts::PI).abs() < 1e-8);
        let ps = Potential::phase_space(Potential::quadratic(1, 1.0f64));
        let m = GibbsMeasure::build(&ps, &[7.0, 7.0], 401, Domain::WholeSpace).unwrap();
        assert!((m.z() - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn custom_potentials() {
        let lebesgue = Potential::<f64>::parse("0*x1", 1).unwrap();
        let m = GibbsMeasure::normalize_on_box(&lebesgue, 1.0, 101).unwrap();
        assert!((m.z() - 2.0).abs() < 1e-12);
        assert!(matches!(
            GibbsMeasure::normalize(&lebesgue, 1.0, 101),
            Err(MeasureError::NotIntegrable(_))
        ));
        let g = Potential::<f64>::parse("x1^2/2", 1).unwrap();
        let m = GibbsMeasure::normalize(&g, 8.0, 2001).unwrap();
        assert!(!m.tail_known() && m.tail_fraction() == 0.0);
        assert!(matches!(
            GibbsMeasure::normalize(&Potential::quadratic(1, 0.0f64), 5.0, 101),
            Err(MeasureError::NotIntegrable(_))
        ));
        let d3 = Potential::quadratic(3, 1.0f64);
        assert!(matches!(GibbsMeasure::normalize(&d3, 1.0, 11), Err(MeasureError::DimensionTooLarge(3))));
    }
}
