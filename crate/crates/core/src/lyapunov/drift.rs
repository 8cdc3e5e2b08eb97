use std::fmt;

use rayon::prelude::*;

use super::{LyapunovCandidate, LyapunovError, PhiSpec};
use crate::error::EvalError;
use crate::generators::{Generator, Smooth};
use crate::potentials::{norm, GibbsMeasure, Potential};
use crate::quadrature::gl_composite;
use crate::scalar::{linspace, sum_compensated};
use crate::Real;

/// Tensor grid `Π [lo_k, hi_k]` with `n_k` nodes per axis; node `k` has the first axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub n: Vec<usize>,
}

impl<T: Real> GridSpec<T> {
    pub fn cube(dim: usize, half_width: T, n: usize) -> Self {
        GridSpec {
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
            n: vec![n; dim],
        }
    }

    pub fn new(lo: Vec<T>, hi: Vec<T>, n: Vec<usize>) -> Result<Self, LyapunovError> {
        if lo.len() != hi.len() || lo.len() != n.len() || lo.is_empty() {
            return Err(LyapunovError::InvalidParameter("grid bounds and sizes differ in length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) || n.iter().any(|&k| k < 2) {
            return Err(LyapunovError::InvalidParameter("grid needs lo < hi and at least 2 nodes per axis".into()));
        }
        Ok(GridSpec { lo, hi, n })
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn axes(&self) -> Vec<Vec<T>> {
        (0..self.dim()).map(|k| linspace(self.lo[k], self.hi[k], self.n[k])).collect()
    }

    fn index(&self, mut k: usize) -> Vec<usize> {
        self.n
            .iter()
            .map(|&m| {
                let i = k % m;
                k /= m;
                i
            })
            .collect()
    }

    pub fn point(&self, k: usize) -> Vec<T> {
        let h: Vec<T> = (0..self.dim())
            .map(|a| (self.hi[a] - self.lo[a]) / T::from_usize_lossy(self.n[a] - 1))
            .collect();
        self.index(k)
            .into_iter()
            .enumerate()
            .map(|(a, i)| if i + 1 == self.n[a] { self.hi[a] } else { self.lo[a] + h[a] * T::from_usize_lossy(i) })
            .collect()
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.index(k).iter().zip(&self.n).any(|(&i, &m)| i == 0 || i + 1 == m)
    }

    /// Halves the spacing: `n ↦ 2n − 1`, keeping every old node.
    pub fn refine(&self) -> Self {
        GridSpec {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            n: self.n.iter().map(|&m| 2 * m - 1).collect(),
        }
    }

    /// Largest centred ball inside the grid.
    pub fn inner_radius(&self) -> T {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (-*a).min(*b))
            .fold(T::infinity(), T::min)
    }

    #[allow(dead_code)]
    pub(crate) fn axis(&self, k: usize) -> Vec<T> {
        self.axes().swap_remove(k)
    }
}

impl<T: Real> fmt::Display for GridSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (0..self.dim())
            .map(|k| format!("[{}, {}]x{}", self.lo[k], self.hi[k], self.n[k]))
            .collect();
        write!(f, "{}", parts.join(" * "))
    }
}

/// The set `C` of a drift inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftSet<T> {
    Sublevel { theta: T },
    Ball { radius: T },
    Empty,
}

impl<T: Real> DriftSet<T> {
    pub fn contains(&self, x: &[T], v: T) -> bool {
        match self {
            DriftSet::Sublevel { theta } => v <= *theta,
            DriftSet::Ball { radius } => norm(x) <= *radius,
            DriftSet::Empty => false,
        }
    }
}

impl<T: Real> fmt::Display for DriftSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSet::Sublevel { theta } => write!(f, "{{V <= {theta}}}"),
            DriftSet::Ball { radius } => write!(f, "{{|z| <= {radius}}}"),
            DriftSet::Empty => write!(f, "{{}}"),
        }
    }
}

/// Result of checking `−LV − φ(V) + b·1_C ≥ −tol` at every grid node.
#[derive(Debug, Clone)]
pub struct DriftCertificate<T> {
    pub candidate: LyapunovCandidate<T>,
    pub phi: PhiSpec<T>,
    pub b: T,
    pub set: DriftSet<T>,
    pub grid: GridSpec<T>,
    /// Per node, `NaN` where the candidate is singular.
    pub margins: Vec<T>,
    pub worst_margin: T,
    pub worst_node: Vec<T>,
    pub tol: T,
    pub min_v: T,
    /// Nodes at which `V` or `LV` is singular and which were left out.
    pub skipped: usize,
    /// Grid nodes inside `C`.
    pub nodes_in_set: usize,
    pub valid: bool,
    pub notes: Vec<String>,
}

impl<T: Real> DriftCertificate<T> {
    pub fn report(&self) -> String {
        let mut s = format!(
            "candidate  {}\nphi        {}\nb          {}\nC          {}\ngrid       {}\nworst      {:e} at {:?}\ntol        {:e}\nmin V      {}\nskipped    {}\nverdict    {}\n",
            self.candidate,
            self.phi,
            self.b,
            self.set,
            self.grid,
            self.worst_margin,
            self.worst_node.iter().map(|v| v.f64()).collect::<Vec<_>>(),
            self.tol,
            self.min_v,
            self.skipped,
            if self.valid { "VALID" } else { "INVALID" }
        );
        for n in &self.notes {
            s.push_str(&format!("note       {n}\n"));
        }
        s
    }
}

struct NodeEval<T> {
    v: T,
    lv: T,
}

fn evaluate<T: Real>(
    gen: &Generator<T>,
    cand: &LyapunovCandidate<T>,
    grid: &GridSpec<T>,
) -> Result<Vec<Option<NodeEval<T>>>, LyapunovError> {
    if gen.state_dim() != cand.dim() || grid.dim() != cand.dim() {
        return Err(LyapunovError::InvalidParameter(format!(
            "dimensions differ: generator {}, candidate {}, grid {}",
            gen.state_dim(),
            cand.dim(),
            grid.dim()
        )));
    }
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            match cand.jet(&x).and_then(|j| gen.apply_jet(&j, &x).map(|lv| (j.value, lv))) {
                Ok((v, lv)) => Ok(Some(NodeEval { v, lv })),
                Err(EvalError::SingularPoint { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            }
        })
        .collect()
}

fn check_contains<T: Real>(
    set: &DriftSet<T>,
    grid: &GridSpec<T>,
    evals: &[Option<NodeEval<T>>],
) -> Result<(), LyapunovError> {
    match set {
        DriftSet::Sublevel { theta } => {
            let edge = (0..grid.len())
                .filter(|&k| grid.is_boundary(k))
                .filter_map(|k| evals[k].as_ref().map(|e| e.v))
                .fold(T::infinity(), T::min);
            if edge <= *theta {
                return Err(LyapunovError::GridMissesSet(format!(
                    "min V on the grid boundary is {edge} <= theta = {theta}"
                )));
            }
        }
        DriftSet::Ball { radius } => {
            if *radius >= grid.inner_radius() {
                return Err(LyapunovError::GridMissesSet(format!(
                    "ball radius {radius} reaches the grid boundary"
                )));
            }
        }
        DriftSet::Empty => {}
    }
    Ok(())
}

/// Checks `LV ≤ −φ(V) + b·1_C` node by node.
pub fn verify_drift<T: Real>(
    gen: &Generator<T>,
    cand: &LyapunovCandidate<T>,
    phi: &PhiSpec<T>,
    b: T,
    set: DriftSet<T>,
    grid: &GridSpec<T>,
) -> Result<DriftCertificate<T>, LyapunovError> {
    if b < T::zero() {
        return Err(LyapunovError::InvalidParameter(format!("b = {b} is negative")));
    }
    let evals = evaluate(gen, cand, grid)?;
    check_contains(&set, grid, &evals)?;

    let scale = evals
        .iter()
        .flatten()
        .map(|e| e.lv.abs())
        .fold(T::zero(), T::max)
        .max(T::one());
    let tol = T::lit(1e-8) * scale;
    let mut margins = Vec::with_capacity(evals.len());
    let mut worst = T::infinity();
    let mut worst_k = 0;
    let mut min_v = T::infinity();
    let mut skipped = 0;
    let mut in_set = 0;
    for (k, e) in evals.iter().enumerate() {
        let Some(e) = e else {
            skipped += 1;
            margins.push(T::nan());
            continue;
        };
        let x = grid.point(k);
        let inside = set.contains(&x, e.v);
        if inside {
            in_set += 1;
        }
        let m = -e.lv - phi.eval(e.v) + if inside { b } else { T::zero() };
        if m < worst {
            worst = m;
            worst_k = k;
        }
        min_v = min_v.min(e.v);
        margins.push(m);
    }
    let mut notes = Vec::new();
    let mut valid = worst >= -tol;
    if min_v < T::one() - tol {
        notes.push(format!("V dips below 1 (min {min_v})"));
        valid = false;
    }
    if matches!(phi, PhiSpec::Linear(_)) && (b <= T::zero() || in_set == 0) {
        notes.push("linear phi needs b > 0 and a set C with positive mass".into());
        valid = false;
    }
    if skipped > 0 {
        notes.push(format!("{skipped} singular node(s) left out"));
    }
    Ok(DriftCertificate {
        candidate: cand.clone(),
        phi: phi.clone(),
        b,
        set,
        grid: grid.clone(),
        margins,
        worst_margin: worst,
        worst_node: grid.point(worst_k),
        tol,
        min_v,
        skipped,
        nodes_in_set: in_set,
        valid,
        notes,
    })
}

/// Shape fitted by [`fit_drift_params`]: `φ = α·u`, or `φ = c·φ₀` for a given `φ₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiFamily<T> {
    Linear,
    Scaled(PhiSpec<T>),
}

impl<T: Real> PhiFamily<T> {
    fn base(&self, u: T) -> T {
        match self {
            PhiFamily::Linear => u,
            PhiFamily::Scaled(p) => p.eval(u),
        }
    }

    fn with_constant(&self, k: T) -> PhiSpec<T> {
        match self {
            PhiFamily::Linear => PhiSpec::Linear(k),
            PhiFamily::Scaled(p) => p.scaled(k),
        }
    }
}

/// Minimum of `−LV/V` over radial bins of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioBin {
    pub r_lo: f64,
    pub r_hi: f64,
    pub min_ratio: f64,
}

fn ratio_profile<T: Real>(grid: &GridSpec<T>, evals: &[Option<NodeEval<T>>]) -> Vec<RatioBin> {
    const BINS: usize = 20;
    let radii: Vec<T> = (0..grid.len()).map(|k| norm(&grid.point(k))).collect();
    let rmax = radii.iter().copied().fold(T::zero(), T::max).f64().max(f64::MIN_POSITIVE);
    let mut bins: Vec<RatioBin> = (0..BINS)
        .map(|i| RatioBin {
            r_lo: rmax * i as f64 / BINS as f64,
            r_hi: rmax * (i + 1) as f64 / BINS as f64,
            min_ratio: f64::INFINITY,
        })
        .collect();
    for (r, e) in radii.iter().zip(evals) {
        if let Some(e) = e {
            let i = ((r.f64() / rmax * BINS as f64) as usize).min(BINS - 1);
            bins[i].min_ratio = bins[i].min_ratio.min((-e.lv / e.v).f64());
        }
    }
    bins
}

#[derive(Debug, Clone)]
pub struct FittedDrift<T> {
    /// Smallest node value of `V` beyond the non-positive drift ratios.
    pub theta0: T,
    pub theta: T,
    /// Fitted constant (`α` or `c`).
    pub constant: T,
    pub certificate: DriftCertificate<T>,
}

/// Fits `C = {V ≤ θ}`, the constant of `φ` and `b` from the ratio `−LV/φ₀(V)` on the grid.
///
/// `θ₀` is the smallest node value of `V` above every node with a non-positive ratio, `θ = 2θ₀`, the constant is the
/// infimum of the ratio over `{V > θ}` and `b = max_C (LV + φ(V))₊`.
pub fn fit_drift_params<T: Real>(
    gen: &Generator<T>,
    cand: &LyapunovCandidate<T>,
    family: &PhiFamily<T>,
    grid: &GridSpec<T>,
) -> Result<FittedDrift<T>, LyapunovError> {
    let evals = evaluate(gen, cand, grid)?;
    let profile = || ratio_profile(grid, &evals);
    let nodes: Vec<(usize, &NodeEval<T>)> = evals.iter().enumerate().filter_map(|(k, e)| e.as_ref().map(|e| (k, e))).collect();
    if nodes.is_empty() {
        return Err(LyapunovError::InvalidParameter("candidate is singular at every node".into()));
    }
    let ratio = |e: &NodeEval<T>| -e.lv / family.base(e.v);
    let edge = nodes
        .iter()
        .filter(|(k, _)| grid.is_boundary(*k))
        .map(|(_, e)| e.v)
        .fold(T::infinity(), T::min);
    let bad: Vec<&(usize, &NodeEval<T>)> = nodes.iter().filter(|(_, e)| !(ratio(e) > T::zero())).collect();
    if let Some((k, _)) = bad.iter().find(|(k, _)| grid.is_boundary(*k)) {
        return Err(LyapunovError::NoDriftRegion {
            reason: format!("-LV/phi(V) <= 0 on the grid boundary at {:?}", grid.point(*k).iter().map(|v| v.f64()).collect::<Vec<_>>()),
            profile: profile(),
        });
    }
    // smallest node value above every non-positive ratio, so the crossing is not undershot
    let worst_bad = bad.iter().map(|(_, e)| e.v).fold(T::neg_infinity(), T::max);
    let theta0 = nodes
        .iter()
        .map(|(_, e)| e.v)
        .filter(|v| *v > worst_bad)
        .fold(T::infinity(), T::min);
    let theta = T::lit(2.0) * theta0;
    if edge <= theta {
        return Err(LyapunovError::GridMissesSet(format!(
            "C = {{V <= {theta}}} reaches the grid boundary (min V there {edge}); enlarge the grid"
        )));
    }
    let constant = nodes
        .iter()
        .filter(|(_, e)| e.v > theta)
        .map(|(_, e)| ratio(e))
        .fold(T::infinity(), T::min);
    if !(constant > T::zero()) || !constant.is_finite() {
        return Err(LyapunovError::NoDriftRegion {
            reason: format!("infimum of -LV/phi(V) outside V <= {theta} is {constant}"),
            profile: profile(),
        });
    }
    let phi = family.with_constant(constant);
    let b = nodes
        .iter()
        .filter(|(_, e)| e.v <= theta)
        .map(|(_, e)| e.lv + phi.eval(e.v))
        .fold(T::zero(), T::max);
    // a hair above the exact maximum so the fitted certificate clears its own tolerance
    let b = b * (T::one() + T::lit(1e-12));
    let certificate = verify_drift(gen, cand, &phi, b, DriftSet::Sublevel { theta }, grid)?;
    Ok(FittedDrift {
        theta0,
        theta,
        constant,
        certificate,
    })
}

/// `½ΔF(x) + (a/2 − 1)|∇F(x)|²`, for which `L(e^{aF}) = a e^{aF} H_a` when `L = ½Δ − ∇F·∇`.
pub fn h_a<T: Real>(f: &Potential<T>, a: T, x: &[T]) -> Result<T, LyapunovError> {
    if !(a > T::zero() && a < T::lit(2.0)) {
        return Err(LyapunovError::InvalidParameter(format!("a = {a} must lie in (0, 2)")));
    }
    let j = f.jet(x)?;
    let g2: T = j.grad.iter().map(|g| *g * *g).sum();
    Ok(T::lit(0.5) * j.laplacian() + (a * T::lit(0.5) - T::one()) * g2)
}

/// `α∫V dμ` against `b·μ(C)` for a linear certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedDrift<T> {
    pub lhs: T,
    pub rhs: T,
    /// Mass of `μ` outside the quadrature box.
    pub tail: T,
}

impl<T: Real> IntegratedDrift<T> {
    pub fn holds(&self, slack: T) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// `μ(C)` in 1D with the boundary of `C` located by bisection inside each grid cell, since
/// node quadrature of an indicator is only first-order accurate.
fn set_mass_1d<T: Real>(mu: &GibbsMeasure<T>, inside: &dyn Fn(&[T]) -> bool) -> Result<T, LyapunovError> {
    let err = std::cell::RefCell::new(None);
    let rho = |x: T| match mu.density(&[x]) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            T::zero()
        }
    };
    let axis = mu.axis(0);
    let mut parts = Vec::with_capacity(axis.len());
    for w in axis.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ia, ib) = (inside(&[a]), inside(&[b]));
        let (lo, hi) = match (ia, ib) {
            (true, true) => (a, b),
            (false, false) => continue,
            _ => {
                // keep `l` on the side of `a`
                let (mut l, mut r) = (a, b);
                for _ in 0..60 {
                    let m = (l + r) * T::lit(0.5);
                    if inside(&[m]) == ia {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                if ia {
                    (a, l)
                } else {
                    (r, b)
                }
            }
        };
        parts.push(gl_composite(rho, lo, hi, 1, 8));
    }
    if let Some(e) = err.into_inner() {
        return Err(e.into());
    }
    Ok(sum_compensated(parts))
}

/// Integrates a linear drift inequality against `μ` (overdamped certificates only).
pub fn integrated_drift<T: Real>(
    cert: &DriftCertificate<T>,
    mu: &GibbsMeasure<T>,
) -> Result<IntegratedDrift<T>, LyapunovError> {
    let PhiSpec::Linear(alpha) = cert.phi else {
        return Err(LyapunovError::InvalidParameter("integrated drift needs a linear phi".into()));
    };
    if cert.candidate.dim() != mu.dim() {
        return Err(LyapunovError::InvalidParameter("measure and candidate dimensions differ".into()));
    }
    let err = std::cell::RefCell::new(None);
    let v_int = mu.expectation(|x| match cert.candidate.value(x) {
        Ok(v) => v,
        Err(e) => {
            err.borrow_mut().get_or_insert(e);
            T::zero()
        }
    });
    if let Some(e) = err.into_inner() {
        return Err(e.into());
    }
    let inside = |x: &[T]| {
        let v = cert.candidate.value(x).unwrap_or(T::infinity());
        cert.set.contains(x, v)
    };
    let mu_c = if mu.dim() == 1 {
        set_mass_1d(mu, &inside)?
    } else {
        mu.expectation(|x| if inside(x) { T::one() } else { T::zero() })
    };
    Ok(IntegratedDrift {
        lhs: alpha * v_int,
        rhs: cert.b * mu_c,
        tail: mu.tail_fraction(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou() -> (Generator<f64>, LyapunovCandidate<f64>) {
        let q = Potential::quadratic(1, 1.0);
        (Generator::overdamped(q), LyapunovCandidate::custom("1 + x1^2", 1).unwrap())
    }

    #[test]
    fn hand_certificate_for_ou() {
        let (gen, v) = ou();
        let grid = GridSpec::cube(1, 4.0, 801);
        let set = DriftSet::Ball { radius: 2f64.sqrt() };
        let ok = verify_drift(&gen, &v, &PhiSpec::linear(1.0), 2.0, set, &grid).unwrap();
        assert!(ok.valid, "{}", ok.report());
        let bad = verify_drift(&gen, &v, &PhiSpec::linear(1.0), 1.0, set, &grid).unwrap();
        assert!(!bad.valid);
        assert!(bad.worst_node[0].abs() < 1e-12);
        assert!((bad.worst_margin + 1.0).abs() < 1e-5);
        let big = DriftSet::Ball { radius: 5.0 };
        assert!(matches!(
            verify_drift(&gen, &v, &PhiSpec::linear(1.0), 2.0, big, &grid),
            Err(LyapunovError::GridMissesSet(_))
        ));
    }

    #[test]
    fn refinement_and_scaling() {
        let (gen, v) = ou();
        let grid = GridSpec::cube(1, 4.0, 201);
        let set = DriftSet::Ball { radius: 2f64.sqrt() };
        let c = verify_drift(&gen, &v, &PhiSpec::linear(1.0), 2.0, set, &grid).unwrap();
        let fine = verify_drift(&gen, &v, &PhiSpec::linear(1.0), 2.0, set, &grid.refine()).unwrap();
        assert!(c.valid && fine.worst_margin >= -10.0 * c.tol);
        let s = 3.0;
        let scaled = LyapunovCandidate::custom("3 + 3*x1^2", 1).unwrap();
        assert!(verify_drift(&gen, &scaled, &PhiSpec::linear(1.0), 2.0 * s, set, &grid).unwrap().valid);
    }

    #[test]
    fn fit_recovers_ou_certificate() {
        let (gen, v) = ou();
        let grid = GridSpec::cube(1, 4.0, 801);
        let fit = fit_drift_params(&gen, &v, &PhiFamily::Linear, &grid).unwrap();
        assert!((fit.theta - 3.0).abs() < 0.02, "{}", fit.theta);
        assert!(fit.constant >= 1.0 && fit.constant < 1.01, "{}", fit.constant);
        assert!((fit.certificate.b - 1.0 - fit.constant).abs() < 1e-9 && fit.certificate.b < 2.01);
        assert!(fit.certificate.valid);
        // C ⊆ {|x| ≤ √2 + ε}
        assert!((fit.theta - 1.0).sqrt() < 2f64.sqrt() + 0.01);

        let mu = GibbsMeasure::normalize(&Potential::quadratic(1, 1.0), 8.0, 801).unwrap();
        let id = integrated_drift(&fit.certificate, &mu).unwrap();
        assert!(id.holds(1e-8), "{id:?}");
    }

    #[test]
    fn position_only_candidate_fails_for_kinetic() {
        let gen = Generator::kinetic(Potential::quadratic(1, 1.0));
        let v = LyapunovCandidate::custom("1 + x1^2", 2).unwrap();
        let grid = GridSpec::cube(2, 4.0, 41);
        match fit_drift_params(&gen, &v, &PhiFamily::Linear, &grid) {
            Err(LyapunovError::NoDriftRegion { profile, .. }) => assert_eq!(profile.len(), 20),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn heavy_tail_gets_sublinear_phi() {
        // F = (3/2) log(1 + |x|), V = (1 + |x|)^{a·3/2}: LV ~ −V^{1 − 4/(3a)} at infinity
        let (p, a) = (2.0f64, 0.5);
        let e = a * (1.0 + p) / 2.0;
        let gen = Generator::overdamped(Potential::heavy_tail(1, p));
        let v = LyapunovCandidate::power_radial(1, e);
        let grid = GridSpec::cube(1, 200.0, 4000);
        let base = PhiSpec::general(&format!("u^{}", 1.0 - 2.0 / e)).unwrap();
        let fit = fit_drift_params(&gen, &v, &PhiFamily::Scaled(base), &grid).unwrap();
        assert!(fit.certificate.valid, "{}", fit.certificate.report());
        assert!(!matches!(fit.certificate.phi, PhiSpec::Linear(_)));
        // a linear fit exists on every finite grid but its constant vanishes as the grid grows
        let small = fit_drift_params(&gen, &v, &PhiFamily::Linear, &GridSpec::cube(1, 100.0, 2000)).unwrap();
        let large = fit_drift_params(&gen, &v, &PhiFamily::Linear, &grid).unwrap();
        assert!(small.constant / large.constant > 3.5);
    }

    #[test]
    fn h_a_values_and_identity() {
        let q = Potential::quadratic(1, 1.0f64);
        assert!((h_a(&q, 1.0, &[2.0]).unwrap() + 1.5).abs() < 1e-15);
        assert!(h_a(&q, 2.0, &[2.0]).is_err());
        let f = Potential::power(1, 1.3, 0.1);
        let gen = Generator::overdamped(f.clone());
        let a = 0.7;
        let v = LyapunovCandidate::exp_potential(f.clone(), a);
        for i in 0..100 {
            let x = -5.0 + 10.0 * (i as f64 + 0.5) / 100.0;
            let lv = gen.apply(&v, &[x]).unwrap();
            let rhs = a * v.value(&[x]).unwrap() * h_a(&f, a, &[x]).unwrap();
            assert!((lv - rhs).abs() < 1e-8 * rhs.abs().max(1.0), "{x}: {lv} {rhs}");
        }
    }
}
