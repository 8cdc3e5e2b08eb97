use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GibbsMeasure, MeasureError};
use crate::Real;

/// Cumulative trapezoid CDF of the box-restricted density, normalised to end at 1.
fn box_cdf<T: Real>(m: &GibbsMeasure<T>) -> Result<(Vec<T>, Vec<T>), MeasureError> {
    if m.dim() != 1 {
        return Err(MeasureError::NotOneDimensional(m.dim()));
    }
    let x = m.axis(0).to_vec();
    let dens: Vec<T> = x
        .iter()
        .map(|xi| m.density(std::slice::from_ref(xi)))
        .collect::<Result<_, _>>()?;
    let mut cdf = Vec::with_capacity(x.len());
    cdf.push(T::zero());
    let half = T::lit(0.5);
    for i in 1..x.len() {
        let prev = cdf[i - 1];
        cdf.push(prev + half * (dens[i] + dens[i - 1]) * (x[i] - x[i - 1]));
    }
    let total = cdf[cdf.len() - 1];
    cdf.iter_mut().for_each(|c| *c /= total);
    Ok((x, cdf))
}

/// Inverse-CDF sampling on the box by cumulative trapezoid and linear interpolation.
pub fn sample_1d<T: Real>(m: &GibbsMeasure<T>, n: usize, seed: u64) -> Result<Vec<T>, MeasureError> {
    let (x, cdf) = box_cdf(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let u = T::lit(rng.random::<f64>());
            let i = cdf.partition_point(|c| *c <= u).clamp(1, x.len() - 1);
            let (c0, c1) = (cdf[i - 1], cdf[i]);
            let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { T::zero() };
            x[i - 1] + frac * (x[i] - x[i - 1])
        })
        .collect())
}

/// Kolmogorov–Smirnov distance between a sample and the measure's box CDF.
pub fn ks_statistic<T: Real>(m: &GibbsMeasure<T>, sample: &[T]) -> Result<T, MeasureError> {
    let (x, cdf) = box_cdf(m)?;
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    let n = T::from_usize_lossy(s.len());
    let mut worst = T::zero();
    for (k, v) in s.iter().enumerate() {
        let i = x.partition_point(|xi| xi <= v).clamp(1, x.len() - 1);
        let frac = ((*v - x[i - 1]) / (x[i] - x[i - 1])).max(T::zero()).min(T::one());
        let f = cdf[i - 1] + frac * (cdf[i] - cdf[i - 1]);
        let lo = T::from_usize_lossy(k) / n;
        let hi = T::from_usize_lossy(k + 1) / n;
        worst = worst.max((f - lo).abs()).max((hi - f).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;

    fn ou() -> GibbsMeasure<f64> {
        GibbsMeasure::normalize(&Potential::quadratic(1, 1.0), 8.0, 4001).unwrap()
    }

    #[test]
    fn variance_matches_quadrature() {
        let m = ou();
        let oracle = m.expectation(|x| x[0] * x[0]);
        assert!((oracle - 0.5).abs() < 1e-8);
        let s = sample_1d(&m, 1_000_000, 7).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64;
        assert!((var - 0.5).abs() < 0.003, "{var}");
    }

    #[test]
    fn deterministic_and_empty() {
        let m = ou();
        assert!(sample_1d(&m, 0, 1).unwrap().is_empty());
        assert_eq!(sample_1d(&m, 100, 3).unwrap(), sample_1d(&m, 100, 3).unwrap());
        assert_ne!(sample_1d(&m, 100, 3).unwrap(), sample_1d(&m, 100, 4).unwrap());
        let m2 = GibbsMeasure::normalize(&Potential::quadratic(2, 1.0), 6.0, 101).unwrap();
        assert!(matches!(sample_1d(&m2, 1, 1), Err(MeasureError::NotOneDimensional(2))));
    }

    #[test]
    fn ks_and_chi_square() {
        let m = GibbsMeasure::normalize(&Potential::power(1, 1.5, 0.01), 8.0, 4001).unwrap();
        let n = 100_000;
        let s = sample_1d(&m, n, 11).unwrap();
        let ks = ks_statistic(&m, &s).unwrap();
        assert!(ks < 2.0 / (n as f64).sqrt(), "{ks}");

        // 50 equal-width bins on [-3, 3] plus the two outer bins folded in
        let edges: Vec<f64> = (0..=50).map(|i| -3.0 + 6.0 * i as f64 / 50.0).collect();
        let mut counts = vec![0usize; 50];
        for v in &s {
            let b = (((v + 3.0) / 6.0 * 50.0).floor() as isize).clamp(0, 49) as usize;
            counts[b] += 1;
        }
        let z_box = m.z_box();
        let mass = |a: f64, b: f64| {
            crate::quadrature::gl_composite(|x| m.density(&[x]).unwrap() * m.z() / z_box, a, b, 8, 16)
        };
        let mut chi2 = 0.0;
        for b in 0..50 {
            let lo = if b == 0 { -8.0 } else { edges[b] };
            let hi = if b == 49 { 8.0 } else { edges[b + 1] };
            let e = n as f64 * mass(lo, hi);
            chi2 += (counts[b] as f64 - e).powi(2) / e;
        }
        // 99th percentile of chi-square with 49 degrees of freedom
        assert!(chi2 < 74.92, "{chi2}");
    }
}
