use super::evolve::{check_initial, check_negative, EvolveOptions, SemigroupTrace};
use super::SpectralError;
use crate::potentials::Potential;
use crate::scalar::{cell_centres, sum_compensated};
use crate::Real;

/// Largest number of cells per axis accepted by [`Kinetic2d::new`].
pub const MAX_KINETIC_NODES: usize = 201;

/// Finite-volume discretisation of the kinetic generator on cells of
/// `[-R_x, R_x] × [-R_v, R_v]` (one position and one velocity coordinate).
///
/// The velocity block `½∂_v² − v∂_v` is a reversible conductance scheme with respect to
/// `e^{-v²}`. The transport `v∂_x − F'(x)∂_v` uses face fluxes of `e^{-H}(v, −F')` computed
/// from the stream function `−½e^{-H}` at cell corners (zero on the outer corners), which
/// makes the discrete flux exactly divergence free, and upwind jump rates. The cell masses
/// `e^{-H}` are therefore exactly invariant.
#[derive(Debug, Clone)]
pub struct Kinetic2d<T> {
    potential: Potential<T>,
    x: Vec<T>,
    v: Vec<T>,
    mass: Vec<T>,
    /// Off-diagonal rates of the observable generator, neighbours `[x−, x+, v−, v+]`.
    rates: Vec<[T; 4]>,
}

impl<T: Real> Kinetic2d<T> {
    pub fn new(potential: &Potential<T>, rx: T, rv: T, nx: usize, nv: usize) -> Result<Self, SpectralError> {
        if potential.dim() != 1 {
            return Err(SpectralError::Unsupported(format!(
                "kinetic grid needs a 1D position, got d = {}",
                potential.dim()
            )));
        }
        if nx < 3 || nv < 3 || nx > MAX_KINETIC_NODES || nv > MAX_KINETIC_NODES {
            return Err(SpectralError::InvalidGrid(format!(
                "{nx} x {nv} cells; each axis must have 3..={MAX_KINETIC_NODES}"
            )));
        }
        if !(rx > T::zero() && rv > T::zero()) {
            return Err(SpectralError::InvalidGrid("half widths must be positive".into()));
        }
        let x = cell_centres(-rx, rx, nx);
        let v = cell_centres(-rv, rv, nv);
        let hx = x[1] - x[0];
        let hv = v[1] - v[0];
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let f_at = |y: T| potential.value(&[y]);
        let fx: Vec<T> = x.iter().map(|y| f_at(*y)).collect::<Result<_, _>>()?;
        // corner / face coordinates: x_{i+½} for i = -1..nx-1
        let xc: Vec<T> = (0..=nx).map(|i| -rx + hx * T::from_usize_lossy(i)).collect();
        let vc: Vec<T> = (0..=nv).map(|j| -rv + hv * T::from_usize_lossy(j)).collect();
        let fxc: Vec<T> = xc.iter().map(|y| f_at(*y)).collect::<Result<_, _>>()?;
        let h = |f: T, vel: T| vel * vel + two * f;
        let hmin = fx
            .iter()
            .chain(&fxc)
            .copied()
            .fold(T::infinity(), T::min);

        let idx = |i: usize, j: usize| i * nv + j;
        let mut mass = vec![T::zero(); nx * nv];
        for i in 0..nx {
            for j in 0..nv {
                mass[idx(i, j)] = (-(h(fx[i], v[j]) - hmin)).exp() * hx * hv;
            }
        }
        let z = sum_compensated(mass.iter().copied());
        mass.iter_mut().for_each(|m| *m /= z);
        let rho = |f: T, vel: T| (-(h(f, vel) - hmin)).exp() / z;
        let phi = |i: usize, j: usize| {
            if i == 0 || j == 0 || i == nx || j == nv {
                T::zero()
            } else {
                -half * rho(fxc[i], vc[j])
            }
        };

        let mut rates = vec![[T::zero(); 4]; nx * nv];
        // x faces: between (i, j) and (i+1, j), at corner column i+1
        for i in 0..nx - 1 {
            for j in 0..nv {
                let flux = phi(i + 1, j + 1) - phi(i + 1, j);
                let (a, b) = (idx(i, j), idx(i + 1, j));
                rates[a][1] = flux.max(T::zero()) / mass[a];
                rates[b][0] = (-flux).max(T::zero()) / mass[b];
            }
        }
        // v faces: between (i, j) and (i, j+1), at corner row j+1
        for i in 0..nx {
            for j in 0..nv - 1 {
                let flux = -(phi(i + 1, j + 1) - phi(i, j + 1));
                let cond = half * rho(fx[i], vc[j + 1]) * hx / hv;
                let (a, b) = (idx(i, j), idx(i, j + 1));
                rates[a][3] = (cond + flux.max(T::zero())) / mass[a];
                rates[b][2] = (cond + (-flux).max(T::zero())) / mass[b];
            }
        }
        Ok(Kinetic2d {
            potential: potential.clone(),
            x,
            v,
            mass,
            rates,
        })
    }

    pub fn potential(&self) -> &Potential<T> {
        &self.potential
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nv(&self) -> usize {
        self.v.len()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    /// Cell probability masses, index `i·n_v + j`.
    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    fn neighbours(&self, k: usize) -> [Option<usize>; 4] {
        let nv = self.nv();
        let (i, j) = (k / nv, k % nv);
        [
            (i > 0).then(|| k - nv),
            (i + 1 < self.nx()).then(|| k + nv),
            (j > 0).then(|| k - 1),
            (j + 1 < nv).then(|| k + 1),
        ]
    }

    /// Observable generator `(Qf)_k = Σ q(k→l)(f_l − f_k)`.
    pub fn apply(&self, f: &[T], out: &mut [T]) {
        for k in 0..self.len() {
            let mut s = T::zero();
            for (dir, nb) in self.neighbours(k).iter().enumerate() {
                if let Some(l) = nb {
                    s += self.rates[k][dir] * (f[*l] - f[k]);
                }
            }
            out[k] = s;
        }
    }

    /// Density generator `Q*_{kl} = m_l q(l→k) / m_k`, `Q*_{kk} = −Σ_l q(k→l)`.
    pub fn apply_adjoint(&self, h: &[T], out: &mut [T]) {
        for k in 0..self.len() {
            let mut s = T::zero();
            for (dir, nb) in self.neighbours(k).iter().enumerate() {
                if let Some(l) = nb {
                    let back = dir ^ 1;
                    s += self.mass[*l] * self.rates[*l][back] * h[*l] / self.mass[k];
                    s -= self.rates[k][dir] * h[k];
                }
            }
            out[k] = s;
        }
    }

    /// `max_k |Σ_l m_l q(l→k) − m_k Σ_l q(k→l)|`, the defect of `m` being invariant.
    pub fn stationarity_defect(&self) -> T {
        let mut worst = T::zero();
        for k in 0..self.len() {
            let mut inflow = T::zero();
            let mut outflow = T::zero();
            for (dir, nb) in self.neighbours(k).iter().enumerate() {
                if let Some(l) = nb {
                    inflow += self.mass[*l] * self.rates[*l][dir ^ 1];
                    outflow += self.mass[k] * self.rates[k][dir];
                }
            }
            worst = worst.max((inflow - outflow).abs());
        }
        worst
    }

    fn assemble(&self, dt: T, adjoint: bool) -> BandLu<T> {
        let n = self.len();
        let w = self.nv();
        let mut lu = BandLu::zeros(n, w);
        for k in 0..n {
            let mut diag = T::one();
            for (dir, nb) in self.neighbours(k).iter().enumerate() {
                if let Some(l) = nb {
                    let q = self.rates[k][dir];
                    diag += dt * q;
                    let off = if adjoint {
                        self.mass[*l] * self.rates[*l][dir ^ 1] / self.mass[k]
                    } else {
                        q
                    };
                    lu.set(k, *l, -dt * off);
                }
            }
            lu.set(k, k, diag);
        }
        lu.factor();
        lu
    }

    /// Implicit Euler. Densities (`opts.adjoint`) evolve under `Q*`, observables under `Q`.
    pub(crate) fn evolve(
        &self,
        u0: &[T],
        times: &[T],
        opts: &EvolveOptions<T>,
    ) -> Result<SemigroupTrace<T>, SpectralError> {
        check_initial(u0, &self.mass, opts)?;
        let mut u = u0.to_vec();
        let mut trace = SemigroupTrace::new();
        let w = opts.weight.as_deref();
        let mut cached: Option<(T, BandLu<T>)> = None;
        let mut t = T::zero();
        for &target in times {
            let span = target - t;
            if span > T::zero() {
                let steps = (span / opts.dt * (T::one() - T::lit(1e-9)))
                    .ceil()
                    .to_usize()
                    .unwrap_or(1)
                    .max(1);
                let dt = span / T::from_usize_lossy(steps);
                let reuse = matches!(&cached, Some((d, _)) if ((*d - dt) / dt).abs() < T::lit(1e-12));
                if !reuse {
                    cached = Some((dt, self.assemble(dt, opts.adjoint)));
                }
                let lu = &cached.as_ref().expect("factorisation").1;
                for _ in 0..steps {
                    lu.solve(&mut u);
                }
                t = target;
                check_negative(&u, t, opts.mode)?;
            }
            trace.record(target, &u, &self.mass, w, opts.mode);
        }
        Ok(trace)
    }
}

/// Density (w.r.t. the discrete invariant law) of a Gaussian with mean `(x0, v0)` and
/// per-coordinate variance `sigma²`, normalised to unit mass on the grid.
pub fn shifted_gaussian_density<T: Real>(k: &Kinetic2d<T>, x0: T, v0: T, sigma: T) -> Vec<T> {
    let nv = k.nv();
    let two = T::lit(2.0);
    let logs: Vec<T> = (0..k.len())
        .map(|c| {
            let (x, v) = (k.x[c / nv], k.v[c % nv]);
            let f = k.potential.value(&[x]).unwrap_or(T::infinity());
            -((x - x0) * (x - x0) + (v - v0) * (v - v0)) / (two * sigma * sigma) + v * v + two * f
        })
        .collect();
    let top = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut h: Vec<T> = logs.iter().map(|l| (*l - top).exp()).collect();
    let mass = sum_compensated(h.iter().zip(&k.mass).map(|(a, b)| *a * *b));
    h.iter_mut().for_each(|v| *v /= mass);
    h
}

/// Band LU without pivoting, for the strictly diagonally dominant implicit-Euler matrices.
#[derive(Debug, Clone)]
struct BandLu<T> {
    n: usize,
    w: usize,
    a: Vec<T>,
}

impl<T: Real> BandLu<T> {
    fn zeros(n: usize, w: usize) -> Self {
        BandLu {
            n,
            w,
            a: vec![T::zero(); n * (2 * w + 1)],
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.w + 1) + (j + self.w - i)
    }

    fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.at(i, j);
        self.a[k] = v;
    }

    fn factor(&mut self) {
        let (n, w) = (self.n, self.w);
        let stride = 2 * w + 1;
        for k in 0..n {
            let pivot = self.a[self.at(k, k)];
            let end = (k + w).min(n - 1);
            let row_k = k * stride + w - k;
            for i in k + 1..=end {
                let ik = self.at(i, k);
                let l = self.a[ik] / pivot;
                if l == T::zero() {
                    continue;
                }
                self.a[ik] = l;
                let row_i = i * stride + w - i;
                for j in k + 1..=end {
                    let akj = self.a[row_k + j];
                    self.a[row_i + j] -= l * akj;
                }
            }
        }
    }

    fn solve(&self, b: &mut [T]) {
        let (n, w) = (self.n, self.w);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(w)..i {
                s -= self.a[self.at(i, k)] * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + w).min(n - 1) {
                s -= self.a[self.at(i, j)] * b[j];
            }
            b[i] = s / self.a[self.at(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{fit_decay_window, EvolveOptions};

    fn grid(n: usize) -> Kinetic2d<f64> {
        Kinetic2d::new(&Potential::quadratic(1, 1.0), 6.0, 6.0, n, n).unwrap()
    }

    #[test]
    fn invariant_masses_and_conservation() {
        let k = grid(41);
        assert!(k.stationarity_defect() < 1e-15);
        let ones = vec![1.0; k.len()];
        let mut out = vec![0.0; k.len()];
        k.apply(&ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
        k.apply_adjoint(&ones, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-9), "{}", out.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        let h: Vec<f64> = (0..k.len()).map(|c| 1.0 + 0.1 * ((c % 7) as f64)).collect();
        k.apply_adjoint(&h, &mut out);
        let flux: f64 = out.iter().zip(k.mass()).map(|(a, b)| a * b).sum();
        assert!(flux.abs() < 1e-12);
    }

    #[test]
    fn transport_matches_generator_in_the_interior() {
        let k = Kinetic2d::new(&Potential::quadratic(1, 1.0), 6.0, 6.0, 161, 161).unwrap();
        let f: Vec<f64> = (0..k.len()).map(|c| k.x()[c / 161] + 0.5 * k.v()[c % 161]).collect();
        let mut out = vec![0.0; k.len()];
        k.apply(&f, &mut out);
        let c = 80 * 161 + 90;
        let (x, v) = (k.x()[80], k.v()[90]);
        let exact = v - (v + x) * 0.5;
        assert!((out[c] - exact).abs() < 0.1, "{} {exact}", out[c]);
    }

    #[test]
    fn band_lu_solves() {
        let mut lu = BandLu::zeros(5, 2);
        let dense = [
            [4.0, -1.0, -0.5, 0.0, 0.0],
            [-1.0, 4.0, -1.0, -0.5, 0.0],
            [-0.5, -1.0, 4.0, -1.0, -0.5],
            [0.0, -0.5, -1.0, 4.0, -1.0],
            [0.0, 0.0, -0.5, -1.0, 4.0],
        ];
        for i in 0..5 {
            for j in 0..5 {
                if dense[i][j] != 0.0 {
                    lu.set(i, j, dense[i][j]);
                }
            }
        }
        lu.factor();
        let x = [1.0, -2.0, 3.0, 0.5, 1.5];
        let mut b: Vec<f64> = (0..5).map(|i| (0..5).map(|j| dense[i][j] * x[j]).sum()).collect();
        lu.solve(&mut b);
        for i in 0..5 {
            assert!((b[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_gaussian_relaxes() {
        let k = grid(81);
        let h0 = shifted_gaussian_density(&k, 1.5, 0.0, 0.5f64.sqrt());
        let mass: f64 = h0.iter().zip(k.mass()).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        let times: Vec<f64> = (0..=60).map(|i| i as f64 * 0.25).collect();
        let d = super::super::DiscretizedGenerator::Kinetic2d(Box::new(k));
        let tr = super::super::semigroup_evolve(&d, &h0, &times, &EvolveOptions::density(0.05)).unwrap();
        assert!(tr.mass.iter().all(|m| (m - 1.0).abs() < 1e-10));
        assert!(tr.min_value >= 0.0);
        assert!(tr.entropy.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let fit = fit_decay_window(&tr.times, &tr.entropy, 1e-8, 1e-1).unwrap();
        assert!(fit.rate > 0.0 && fit.r_squared > 0.95, "{fit:?}");
        let still = super::super::semigroup_evolve(&d, &vec![1.0; h0.len()], &[1.0, 2.0], &EvolveOptions::density(0.05)).unwrap();
        assert!(still.entropy.iter().all(|e| e.abs() < 1e-10));
    }

    #[test]
    fn rejects_oversized_grids() {
        assert!(Kinetic2d::new(&Potential::quadratic(1, 1.0f64), 6.0, 6.0, 202, 10).is_err());
        assert!(Kinetic2d::new(&Potential::quadratic(2, 1.0f64), 6.0, 6.0, 20, 20).is_err());
    }
}
