use std::fmt;

use super::LyapunovError;
use crate::expr::{BinOp, Expr, Vars};
use crate::scalar::Real;

/// Rate function `φ` of a drift condition, defined on `[1, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec<T> {
    /// `φ(u) = αu`
    Linear(T),
    /// `φ(u) = c·u·log^{-r}(e + u)`
    LogPower { c: T, r: T },
    /// Expression in the single variable `u`.
    General(Expr),
}

/// Upper end of the log-spaced grid on which `inf φ` and monotonicity are checked.
const PHI_SCAN_MAX: f64 = 1e12;
const PHI_SCAN_POINTS: usize = 601;

impl<T: Real> PhiSpec<T> {
    pub fn linear(alpha: T) -> Self {
        PhiSpec::Linear(alpha)
    }

    pub fn log_power(c: T, r: T) -> Self {
        PhiSpec::LogPower { c, r }
    }

    pub fn general(text: &str) -> Result<Self, LyapunovError> {
        let e = Expr::parse(text, Vars::Named(&["u"])).map_err(|e| LyapunovError::Phi(e.to_string()))?;
        Ok(PhiSpec::General(e))
    }

    /// `linear:α`, `logpower:c,r` or `expr:<expression in u>`.
    pub fn parse(text: &str) -> Result<Self, LyapunovError> {
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| LyapunovError::Phi(format!("'{text}': expected kind:parameters")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map(T::lit)
                .map_err(|_| LyapunovError::Phi(format!("'{s}' is not a number")))
        };
        match kind.trim() {
            "linear" => Ok(PhiSpec::Linear(num(rest)?)),
            "logpower" => {
                let (c, r) = rest
                    .split_once(',')
                    .ok_or_else(|| LyapunovError::Phi("logpower needs c,r".into()))?;
                Ok(PhiSpec::LogPower { c: num(c)?, r: num(r)? })
            }
            "expr" => Self::general(rest),
            other => Err(LyapunovError::Phi(format!("unknown phi kind '{other}'"))),
        }
    }

    pub fn eval(&self, u: T) -> T {
        match self {
            PhiSpec::Linear(a) => *a * u,
            PhiSpec::LogPower { c, r } => *c * u * (T::E() + u).ln().powf(-*r),
            PhiSpec::General(e) => e.eval(&[u]),
        }
    }

    /// `k·φ`.
    pub fn scaled(&self, k: T) -> Self {
        match self {
            PhiSpec::Linear(a) => PhiSpec::Linear(*a * k),
            PhiSpec::LogPower { c, r } => PhiSpec::LogPower { c: *c * k, r: *r },
            PhiSpec::General(e) => PhiSpec::General(Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Num(k.f64())),
                Box::new(e.clone()),
            )),
        }
    }

    fn scan(&self) -> impl Iterator<Item = (T, T)> + '_ {
        let top = T::lit(PHI_SCAN_MAX).ln();
        (0..PHI_SCAN_POINTS).map(move |i| {
            let u = (top * T::from_usize_lossy(i) / T::from_usize_lossy(PHI_SCAN_POINTS - 1)).exp();
            (u, self.eval(u))
        })
    }

    /// `R = inf_{u ≥ 1} φ(u)`, exact for the linear and log-power kinds and a log-grid minimum
    /// over `[1, 1e12]` otherwise.
    pub fn lower_bound(&self) -> T {
        match self {
            PhiSpec::Linear(a) => *a,
            PhiSpec::LogPower { r, .. } if *r <= T::zero() => self.eval(T::one()),
            _ => self.scan().map(|(_, v)| v).fold(T::infinity(), T::min),
        }
    }

    /// `φ > 0` on the scan grid.
    pub fn check_positive(&self) -> Result<(), LyapunovError> {
        match self.scan().find(|(_, v)| !(*v > T::zero())) {
            Some((u, v)) => Err(LyapunovError::Phi(format!("phi({u}) = {v} is not positive"))),
            None => Ok(()),
        }
    }

    /// Non-decreasing on the log-spaced scan grid.
    pub fn is_increasing(&self) -> bool {
        let vals: Vec<T> = self.scan().map(|(_, v)| v).collect();
        vals.windows(2).all(|w| w[1] >= w[0])
    }
}

impl<T: Real> fmt::Display for PhiSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Linear(a) => write!(f, "linear:{a}"),
            PhiSpec::LogPower { c, r } => write!(f, "logpower:{c},{r}"),
            PhiSpec::General(e) => {
                let names = |_: usize| "u".to_string();
                let text = e.display(&names).to_string();
                write!(f, "expr:{text}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_and_bounds() {
        let l = PhiSpec::linear(2.0f64);
        assert_eq!(l.eval(3.0), 6.0);
        assert_eq!(l.lower_bound(), 2.0);
        assert!(l.is_increasing());
        let lp = PhiSpec::log_power(1.0f64, 2.0);
        assert!((lp.eval(1.0) - 1.0 / (1.0f64 + std::f64::consts::E).ln().powi(2)).abs() < 1e-15);
        assert!(lp.lower_bound() > 0.0 && lp.check_positive().is_ok());
        let g = PhiSpec::<f64>::parse("expr:u^(-2)").unwrap();
        assert!(!g.is_increasing());
        assert!(g.lower_bound() < 1e-20);
        assert_eq!(g.scaled(3.0).eval(2.0), 0.75);
        assert!(PhiSpec::<f64>::parse("expr:u-2").unwrap().check_positive().is_err());
    }

    #[test]
    fn round_trip_text() {
        for s in ["linear:1.5", "logpower:0.5,2", "expr:(u*log(u))"] {
            let p = PhiSpec::<f64>::parse(s).unwrap();
            assert_eq!(PhiSpec::<f64>::parse(&p.to_string()).unwrap(), p);
        }
        assert!(PhiSpec::<f64>::parse("cubic:1").is_err());
        assert!(PhiSpec::<f64>::parse("linear:x").is_err());
    }
}
