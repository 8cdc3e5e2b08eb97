use super::{DecayTrace, MonteCarloError};
use crate::scalar::weighted_linear_fit;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateModel<T> {
    /// `log y = c − ρt`
    Geometric,
    /// `log y = c − ρt^δ`; `None` profiles `δ` over `[0.05, 1]` in steps of 0.01.
    Subgeometric { delta: Option<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit<T> {
    pub model: RateModel<T>,
    /// Minus the fitted slope, whatever the fit quality.
    pub rho_raw: T,
    /// `rho_raw` when `R² > 0.95`.
    pub rho: Option<T>,
    pub delta: T,
    pub intercept: T,
    pub r_squared: T,
    /// Weighted residual sum of squares.
    pub residual: T,
    pub window: (T, T),
    pub points: usize,
}

const MIN_POINTS: usize = 10;

/// Weighted least squares on `log y` over `window`, weights `(y/SE)²` (unit when all SE vanish).
pub fn fit_rate<T: Real>(trace: &DecayTrace<T>, model: RateModel<T>, window: (T, T)) -> Result<RateFit<T>, MonteCarloError> {
    let idx: Vec<usize> = (0..trace.times.len())
        .filter(|&i| trace.times[i] >= window.0 && trace.times[i] <= window.1)
        .collect();
    if idx.len() < MIN_POINTS {
        return Err(MonteCarloError::WindowTooShort(idx.len()));
    }
    for &i in &idx {
        if !(trace.values[i] > T::zero()) {
            return Err(MonteCarloError::NonPositive {
                t: trace.times[i].f64(),
                value: trace.values[i].f64(),
            });
        }
    }
    let y: Vec<T> = idx.iter().map(|&i| trace.values[i].ln()).collect();
    let use_se = idx.iter().all(|&i| trace.stderr[i] > T::zero());
    let w: Vec<T> = idx
        .iter()
        .map(|&i| {
            if use_se {
                let r = trace.values[i] / trace.stderr[i];
                r * r
            } else {
                T::one()
            }
        })
        .collect();
    let t: Vec<T> = idx.iter().map(|&i| trace.times[i]).collect();
    let fit_at = |delta: T| {
        let x: Vec<T> = t.iter().map(|v| v.powf(delta)).collect();
        weighted_linear_fit(&x, &y, &w).map(|f| {
            let res: T = x
                .iter()
                .zip(&y)
                .zip(&w)
                .map(|((xi, yi), wi)| {
                    let e = *yi - f.intercept - f.slope * *xi;
                    *wi * e * e
                })
                .sum();
            (f, res)
        })
    };
    let deltas: Vec<T> = match model {
        RateModel::Geometric => vec![T::one()],
        RateModel::Subgeometric { delta: Some(d) } => vec![d],
        RateModel::Subgeometric { delta: None } => (5..=100).map(|k| T::lit(k as f64 / 100.0)).collect(),
    };
    let mut best: Option<(T, crate::scalar::LineFit<T>, T)> = None;
    for d in deltas {
        if let Some((f, res)) = fit_at(d) {
            if best.as_ref().is_none_or(|b| res < b.2) {
                best = Some((d, f, res));
            }
        }
    }
    let (delta, f, residual) =
        best.ok_or_else(|| MonteCarloError::InvalidInput("degenerate fit window".into()))?;
    // a flat trace carries no rate information
    let flat = y.iter().all(|v| *v == y[0]);
    let r2 = if flat || !f.r_squared.is_finite() { T::zero() } else { f.r_squared };
    let rho_raw = -f.slope;
    Ok(RateFit {
        model,
        rho_raw,
        rho: (r2 > T::lit(0.95)).then_some(rho_raw),
        delta,
        intercept: f.intercept,
        r_squared: r2,
        residual,
        window,
        points: idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::TraceKind;
    use super::*;
    use rand::{Rng, SeedableRng};

    fn trace(t: Vec<f64>, v: Vec<f64>) -> DecayTrace<f64> {
        let se = vec![0.0; t.len()];
        DecayTrace {
            kind: TraceKind::Variance,
            times: t,
            values: v,
            stderr: se,
            notes: vec![],
        }
    }

    #[test]
    fn synthetic_geometric_with_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let t: Vec<f64> = (0..60).map(|i| i as f64 * 0.05).collect();
        let v: Vec<f64> = t
            .iter()
            .map(|t| 3.0 * (-2.0 * t).exp() * (1.0 + 0.01 * (rng.random::<f64>() * 2.0 - 1.0)))
            .collect();
        let f = fit_rate(&trace(t, v), RateModel::Geometric, (0.0, 3.0)).unwrap();
        assert!((f.rho.unwrap() - 2.0).abs() < 0.06);
    }

    #[test]
    fn synthetic_stretched() {
        let t: Vec<f64> = (1..200).map(|i| i as f64 * 0.5).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t.powf(1.0 / 3.0)).exp()).collect();
        let f = fit_rate(&trace(t, v), RateModel::Subgeometric { delta: None }, (0.0, 100.0)).unwrap();
        assert!((f.delta - 0.33).abs() < 0.05, "{}", f.delta);
    }

    #[test]
    fn constant_and_short_traces() {
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let f = fit_rate(&trace(t.clone(), vec![0.7; 20]), RateModel::Geometric, (0.0, 20.0)).unwrap();
        assert!(f.rho_raw.abs() < 1e-12 && f.rho.is_none());
        assert!(matches!(
            fit_rate(&trace(t.clone(), vec![0.7; 20]), RateModel::Geometric, (0.0, 5.0)),
            Err(MonteCarloError::WindowTooShort(6))
        ));
        let mut v = vec![0.7; 20];
        v[3] = -1.0;
        assert!(matches!(fit_rate(&trace(t, v), RateModel::Geometric, (0.0, 20.0)), Err(MonteCarloError::NonPositive { .. })));
    }
}
