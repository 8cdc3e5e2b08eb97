use super::RateError;
use crate::Real;

/// Which right-hand side defines `ξ`: `−C_w β_W(r) log r ≤ t` or `≤ 2t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiConvention {
    #[default]
    T,
    TwoT,
}

impl std::str::FromStr for XiConvention {
    type Err = RateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "t" => Ok(XiConvention::T),
            "2t" => Ok(XiConvention::TwoT),
            other => Err(RateError::InvalidInput(format!("xi convention '{other}' (expected t or 2t)"))),
        }
    }
}

impl std::fmt::Display for XiConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            XiConvention::T => "t",
            XiConvention::TwoT => "2t",
        })
    }
}

type BetaFn<'a, T> = Box<dyn Fn(T) -> Result<T, RateError> + Send + Sync + 'a>;

/// `ξ(t) = 2 inf{r ∈ (0, 1) : −C_w β_W(r) log r ≤ t}` (or `≤ 2t`).
pub struct XiProfile<'a, T> {
    beta: BetaFn<'a, T>,
    c_w: T,
    convention: XiConvention,
    /// Log-spaced `r` from `r_floor` to just below 1, ascending, with `g(r)` (descending).
    log_r: Vec<T>,
    g: Vec<T>,
}

const TABLE_POINTS: usize = 400;

impl<'a, T: Real> XiProfile<'a, T> {
    /// `r_floor` is the smallest `r` at which `β_W` can be evaluated.
    pub fn new<B>(beta: B, c_w: T, convention: XiConvention, r_floor: T) -> Result<Self, RateError>
    where
        B: Fn(T) -> Result<T, RateError> + Send + Sync + 'a,
    {
        if !(c_w > T::zero() && r_floor > T::zero() && r_floor < T::one()) {
            return Err(RateError::InvalidInput("need C_w > 0 and r_floor in (0, 1)".into()));
        }
        let lo = r_floor.ln();
        let hi = T::lit(-1e-9);
        let mut log_r = Vec::with_capacity(TABLE_POINTS);
        let mut g = Vec::with_capacity(TABLE_POINTS);
        for i in 0..TABLE_POINTS {
            let lr = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(TABLE_POINTS - 1);
            let v = -c_w * beta(lr.exp())? * lr;
            if let Some(prev) = g.last() {
                if v > *prev * (T::one() + T::lit(1e-9)) {
                    return Err(RateError::NotMonotone(format!(
                        "-C_w beta_W(r) log r increases at r = {}",
                        lr.exp()
                    )));
                }
            }
            log_r.push(lr);
            g.push(v);
        }
        Ok(XiProfile {
            beta: Box::new(beta),
            c_w,
            convention,
            log_r,
            g,
        })
    }

    pub fn convention(&self) -> XiConvention {
        self.convention
    }

    fn g_at(&self, lr: T) -> Result<T, RateError> {
        Ok(-self.c_w * (self.beta)(lr.exp())? * lr)
    }

    /// Largest `t` the table can invert.
    pub fn t_max(&self) -> T {
        let g0 = self.g[0];
        match self.convention {
            XiConvention::T => g0,
            XiConvention::TwoT => g0 * T::lit(0.5),
        }
    }

    pub fn xi(&self, t: T) -> Result<T, RateError> {
        Ok(self.log_xi(t)?.exp())
    }

    /// `log ξ(t)`, free of underflow for large `t`.
    pub fn log_xi(&self, t: T) -> Result<T, RateError> {
        if !(t > T::zero()) {
            return Err(RateError::InvalidInput(format!("t = {t} must be positive")));
        }
        let level = match self.convention {
            XiConvention::T => t,
            XiConvention::TwoT => T::lit(2.0) * t,
        };
        if level > self.g[0] {
            return Err(RateError::Window(format!(
                "t = {t} needs r below the floor {} (g there is {})",
                self.log_r[0].exp(),
                self.g[0]
            )));
        }
        // g descending: first index with g ≤ level
        let k = self.g.partition_point(|v| *v > level);
        if k == 0 {
            return Ok(T::LN_2() + self.log_r[0]);
        }
        if k == self.g.len() {
            // below the last node: g → 0 as r → 1
            let (mut lo, mut hi) = (self.log_r[k - 1], T::zero());
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid == lo || mid == hi {
                    break;
                }
                if self.g_at(mid)? > level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(T::LN_2() + hi);
        }
        let (mut lo, mut hi) = (self.log_r[k - 1], self.log_r[k]);
        for _ in 0..200 {
            let mid = (lo + hi) * T::lit(0.5);
            if mid == lo || mid == hi || (hi - lo) <= T::lit(1e-12) * lo.abs() {
                break;
            }
            if self.g_at(mid)? > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(T::LN_2() + hi)
    }
}

/// `ξ⁻¹(a) = inf{t > 0 : ξ(t) ≤ a}` by doubling and bisection, with `ξ` and `a` in log form.
pub fn xi_inverse<T: Real, X: Fn(T) -> Result<T, RateError>>(log_xi: &X, log_a: T) -> Result<T, RateError> {
    if log_a == T::neg_infinity() {
        return Ok(T::infinity());
    }
    let tiny = T::lit(1e-300).max(T::min_positive_value());
    if log_xi(tiny)? <= log_a {
        return Ok(T::zero());
    }
    let mut hi = T::one();
    let mut lo = tiny;
    let mut tries = 0;
    while log_xi(hi)? > log_a {
        lo = hi;
        hi *= T::lit(2.0);
        tries += 1;
        if tries > 1000 {
            return Ok(T::infinity());
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid == lo || mid == hi || hi - lo <= T::lit(1e-13) * hi {
            break;
        }
        if log_xi(mid)? > log_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Weak Poincaré function `β(s) = s·inf_{u>0} ξ⁻¹(u e^{1−u/s})/u`; `log_xi` returns `log ξ(t)`.
pub fn weak_beta<T: Real, X: Fn(T) -> Result<T, RateError>>(log_xi: &X, s: T) -> Result<T, RateError> {
    if !(s > T::zero()) {
        return Err(RateError::InvalidInput(format!("s = {s} must be positive")));
    }
    let h = |lu: T| -> Result<T, RateError> {
        let u = lu.exp();
        let log_a = lu + T::one() - u / s;
        Ok(xi_inverse(log_xi, log_a)? / u)
    };
    let ls = s.ln();
    let windows = [(T::lit(1e-12), T::lit(1e4)), (T::lit(1e-20), T::lit(1e12))];
    for (lo_f, hi_f) in windows {
        let (lo, hi) = (ls + lo_f.ln(), ls + hi_f.ln());
        let (x, fx) = golden_min(&h, lo, hi)?;
        let edge = (hi - lo) * T::lit(1e-3);
        if x - lo > edge && hi - x > edge {
            return Ok(s * fx);
        }
    }
    Err(RateError::Window(format!("inf over u at s = {s} sits on the search boundary")))
}

fn golden_min<T: Real, F: Fn(T) -> Result<T, RateError>>(f: &F, mut a: T, mut b: T) -> Result<(T, T), RateError> {
    // coarse scan first: the objective is infinite near both ends
    const SCAN: usize = 200;
    let mut best = (a, T::infinity());
    let mut best_i = 0;
    for i in 0..=SCAN {
        let x = a + (b - a) * T::from_usize_lossy(i) / T::from_usize_lossy(SCAN);
        let v = f(x)?;
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    if !best.1.is_finite() {
        return Err(RateError::Window("objective infinite on the whole window".into()));
    }
    let step = (b - a) / T::from_usize_lossy(SCAN);
    if best_i == 0 || best_i == SCAN {
        return Ok(best);
    }
    a = best.0 - step;
    b = best.0 + step;
    let r = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= T::lit(1e-12) * (T::one() + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let x = (a + b) * T::lit(0.5);
    let fx = f(x)?;
    Ok(if fx <= best.1 { (x, fx) } else { best })
}
