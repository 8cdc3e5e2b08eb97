use super::eigen::kth_eigenvalue;
use super::{DiscretizedGenerator, Reversible1d, SpectralError};
use crate::potentials::{GibbsMeasure, MeasureError, Potential};
use crate::Real;

/// Gap of `−A` (smallest non-zero eigenvalue) with `C_P = 1/λ₁`.
///
/// `C_P` here is measured against `∫ −f L f dμ`; the carré-du-champ convention
/// (`Var ≤ C ∫Γ(f) dμ`) is `C_P / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport<T> {
    pub half_width: T,
    pub n: usize,
    pub gap: T,
    pub c_p: T,
    /// Gap on the refined grid with `2n − 1` nodes.
    pub gap_refined: T,
    pub gap_extrapolated: T,
    pub richardson_error: T,
    /// `λ₁ < 1e−12`: no gap detected at this box size.
    pub no_gap: bool,
}

fn symmetric_tridiagonal<T: Real>(d: &Reversible1d<T>) -> (Vec<T>, Vec<T>) {
    tridiagonal_parts(d.mass(), d.conductances())
}

/// Diagonal and squared off-diagonal of `W^{1/2}(−A)W^{-1/2}` for masses `m`, conductances `c`.
fn tridiagonal_parts<T: Real>(m: &[T], c: &[T]) -> (Vec<T>, Vec<T>) {
    let n = m.len();
    let diag = (0..n)
        .map(|i| {
            let mut s = T::zero();
            if i > 0 {
                s += c[i - 1];
            }
            if i + 1 < n {
                s += c[i];
            }
            s / m[i]
        })
        .collect();
    let e2 = (0..n - 1).map(|i| c[i] * c[i] / (m[i] * m[i + 1])).collect();
    (diag, e2)
}

fn first_gap<T: Real>(d: &Reversible1d<T>) -> Result<T, SpectralError> {
    let (diag, e2) = symmetric_tridiagonal(d);
    let scale = diag.iter().copied().fold(T::zero(), T::max);
    kth_eigenvalue(&diag, &e2, 1, scale * T::epsilon())
        .filter(|v| v.is_finite())
        .map(|v| v.max(T::zero()))
        .ok_or_else(|| SpectralError::EigenFailure("bisection did not bracket λ₁".into()))
}

pub fn spectral_gap<T: Real>(d: &DiscretizedGenerator<T>) -> Result<SpectralReport<T>, SpectralError> {
    let d = match d {
        DiscretizedGenerator::Reversible1d(d) => d,
        DiscretizedGenerator::Kinetic2d(_) => {
            return Err(SpectralError::Unsupported(
                "the kinetic matrix is not symmetric; only evolution is offered".into(),
            ))
        }
    };
    let gap = first_gap(d)?;
    let fine = Reversible1d::new(d.potential(), d.half_width(), 2 * d.len() - 1)?;
    let gap_refined = first_gap(&fine)?;
    let richardson_error = (gap_refined - gap).abs() / T::lit(3.0);
    let tiny = T::lit(1e-12);
    Ok(SpectralReport {
        half_width: d.half_width(),
        n: d.len(),
        gap,
        c_p: if gap > T::zero() { gap.recip() } else { T::infinity() },
        gap_refined,
        gap_extrapolated: gap_refined + (gap_refined - gap) / T::lit(3.0),
        richardson_error,
        no_gap: gap < tiny,
    })
}

/// Muckenhoupt constants with the energy density `½ρ`, so that `B ≤ C_P ≤ 4B` for the
/// `C_P` of [`spectral_gap`].
#[derive(Debug, Clone, PartialEq)]
pub struct MuckenhouptReport<T> {
    pub median: T,
    pub b_plus: T,
    pub b_minus: T,
    pub b: T,
    pub lower: T,
    pub upper: T,
}

/// `B₊ = sup_{x>m} μ([x,∞)) ∫_m^x 2/ρ`, and the mirror image `B₋`. Mass beyond the box is
/// split evenly between the two sides.
pub fn muckenhoupt<T: Real>(m: &GibbsMeasure<T>, median: Option<T>) -> Result<MuckenhouptReport<T>, SpectralError> {
    if m.dim() != 1 {
        return Err(MeasureError::NotOneDimensional(m.dim()).into());
    }
    let x = m.axis(0);
    let n = x.len();
    let pot = m.potential();
    let log_z = m.z().ln();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let f: Vec<T> = x
        .iter()
        .map(|xi| pot.value(std::slice::from_ref(xi)))
        .collect::<Result<_, _>>()?;
    let rho: Vec<T> = f.iter().map(|fi| (-two * *fi - log_z).exp()).collect();
    let side_tail = m.tail_fraction() * half;

    // cumulative mass from the left, trapezoid
    let mut cdf = vec![side_tail; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + half * (rho[i] + rho[i - 1]) * (x[i] - x[i - 1]);
    }
    let total = cdf[n - 1] + side_tail;
    let med = match median {
        Some(v) => v,
        None => {
            let target = total * half;
            let k = cdf.partition_point(|c| *c < target).clamp(1, n - 1);
            let t = (target - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
            x[k - 1] + t * (x[k] - x[k - 1])
        }
    };
    if !(med > x[0] && med < x[n - 1]) {
        return Err(SpectralError::InvalidInput(format!("median {med} outside the box")));
    }
    let rho_med = (-two * pot.value(&[med])? - log_z).exp();
    let inv = |r: T| two / r;

    let k = x.partition_point(|xi| *xi <= med);
    // right side: x_k > med
    let mut b_plus = T::zero();
    let mut acc = half * (inv(rho_med) + inv(rho[k])) * (x[k] - med);
    for i in k..n {
        if i > k {
            acc += half * (inv(rho[i]) + inv(rho[i - 1])) * (x[i] - x[i - 1]);
        }
        let right_mass = total - cdf[i];
        b_plus = b_plus.max(right_mass * acc);
    }
    // left side: x_{k-1} <= med
    let j = k - 1;
    let mut b_minus = T::zero();
    let mut acc = half * (inv(rho_med) + inv(rho[j])) * (med - x[j]);
    for i in (0..=j).rev() {
        if i < j {
            acc += half * (inv(rho[i]) + inv(rho[i + 1])) * (x[i + 1] - x[i]);
        }
        b_minus = b_minus.max(cdf[i] * acc);
    }
    let b = b_plus.max(b_minus);
    Ok(MuckenhouptReport {
        median: med,
        b_plus,
        b_minus,
        b,
        lower: b,
        upper: T::lit(4.0) * b,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport<T> {
    pub half_widths: Vec<T>,
    pub b: Vec<T>,
    pub ratios: Vec<T>,
    /// `B` grew by more than 1.5× on each of the last three doublings.
    pub diverges: bool,
}

/// Muckenhoupt `B` on boxes `r0·2^k`, `k = 0..=doublings`, at fixed spacing `h`.
pub fn detect_no_poincare<T: Real>(
    potential: &Potential<T>,
    r0: T,
    h: T,
    doublings: usize,
) -> Result<DivergenceReport<T>, SpectralError> {
    if doublings < 3 {
        return Err(SpectralError::InvalidInput("need at least three doublings".into()));
    }
    let mut half_widths = Vec::new();
    let mut b = Vec::new();
    let mut r = r0;
    for _ in 0..=doublings {
        let n = (T::lit(2.0) * r / h).round().to_usize().unwrap_or(3) + 1;
        let m = GibbsMeasure::normalize(potential, r, n)?;
        b.push(muckenhoupt(&m, Some(T::zero()))?.b);
        half_widths.push(r);
        r *= T::lit(2.0);
    }
    let ratios: Vec<T> = b.windows(2).map(|w| w[1] / w[0]).collect();
    let diverges = ratios[ratios.len() - 3..].iter().all(|q| *q > T::lit(1.5));
    Ok(DivergenceReport {
        half_widths,
        b,
        ratios,
        diverges,
    })
}

/// Local Poincaré constant of `U = [lo, hi]`, both in the `∫ −fLf dμ` energy convention.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPoincare<T> {
    pub lo: T,
    pub hi: T,
    pub mu_u: T,
    /// Largest ratio of `∫_U f² − (∫_U f)²/μ(U)` to the full-space energy.
    pub kappa_numeric: T,
    /// `(8|U|²/(2π²))·e^{2 osc_U(2F)}`, `|U|` the length of `U`.
    pub kappa_bound: T,
}

/// Works on the box-restricted discretisation of the measure's potential over its grid.
///
/// A maximiser is constant off `U` (that costs no energy and changes nothing on `U`), so the
/// numeric constant is `1/λ₁` of the zero-flux generator restricted to the nodes of `U`.
pub fn local_poincare<T: Real>(m: &GibbsMeasure<T>, lo: T, hi: T) -> Result<LocalPoincare<T>, SpectralError> {
    if m.dim() != 1 {
        return Err(MeasureError::NotOneDimensional(m.dim()).into());
    }
    let r = m.half_widths()[0];
    let slack = r * T::lit(1e-12);
    if !(lo < hi) || lo < -r - slack || hi > r + slack {
        return Err(SpectralError::SubsetOutsideBox {
            lo: lo.f64(),
            hi: hi.f64(),
            half_width: r.f64(),
        });
    }
    let d = Reversible1d::new(m.potential(), r, m.nodes_per_axis())?;
    let x = d.nodes();
    let tol = (x[1] - x[0]) * T::lit(1e-9);
    let i0 = x.partition_point(|xi| *xi < lo - tol);
    let i1 = x.partition_point(|xi| *xi <= hi + tol);
    if i1 < i0 + 2 {
        return Err(SpectralError::InvalidInput("U needs at least two grid nodes".into()));
    }
    let mass = &d.mass()[i0..i1];
    let cond = &d.conductances()[i0..i1 - 1];
    let mu_u = crate::scalar::sum_compensated(mass.iter().copied());
    let (diag, e2) = tridiagonal_parts(mass, cond);
    let scale = diag.iter().copied().fold(T::zero(), T::max);
    let gap = kth_eigenvalue(&diag, &e2, 1, scale * T::epsilon())
        .filter(|v| v.is_finite() && *v > T::zero())
        .ok_or_else(|| SpectralError::EigenFailure("no positive λ₁ on U".into()))?;

    let pot = m.potential();
    let mut fmin = T::infinity();
    let mut fmax = T::neg_infinity();
    for xi in x[i0..i1].iter().chain([lo, hi].iter()) {
        let v = pot.value(std::slice::from_ref(xi))?;
        fmin = fmin.min(v);
        fmax = fmax.max(v);
    }
    let osc = T::lit(2.0) * (fmax - fmin);
    let len = hi - lo;
    let kappa_bound = T::lit(8.0) * len * len / (T::lit(2.0) * T::PI() * T::PI()) * (T::lit(2.0) * osc).exp();
    Ok(LocalPoincare {
        lo,
        hi,
        mu_u,
        kappa_numeric: gap.recip(),
        kappa_bound,
    })
}
