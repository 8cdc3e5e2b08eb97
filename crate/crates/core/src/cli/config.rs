//! Line-oriented `key = value` configuration with dotted sections.
//!
//! ```text
//! # comment
//! name = ou
//! potential = quadratic:1
//! [lyapunov]            # later keys read as lyapunov.<key>
//! phi = linear:1
//! simulate.particles = 4000   # dotted keys work anywhere
//! ```
//!
//! Every key must appear in [`SCHEMA`]; values are type-checked on load.

use std::collections::BTreeMap;
use std::fmt;

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Text,
    Float,
    Int,
    /// `lo..hi` or `lo..hi..points`
    Range,
    /// comma-separated floats
    Floats,
    Choice(&'static [&'static str]),
}

pub struct KeySpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(key: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> KeySpec {
    KeySpec { key, kind, default, help }
}

pub const SCHEMA: &[KeySpec] = &[
    key("name", Kind::Text, Some("custom"), "scenario name used in metadata"),
    key("potential", Kind::Text, None, "quadratic[:k] | power:p[,delta] | heavytail:p | expr:<F(x1..xd)>"),
    key("dim", Kind::Int, Some("1"), "position dimension d"),
    key("generator", Kind::Choice(&["overdamped", "kinetic"]), Some("overdamped"), "generator family"),
    key("grid.half_width", Kind::Float, Some("8"), "spectral box [-R, R]"),
    key("grid.n", Kind::Int, Some("1601"), "spectral nodes"),
    key("measure.half_width", Kind::Float, Some("12"), "quadrature box for the invariant measure"),
    key("measure.n", Kind::Int, Some("4001"), "quadrature nodes per axis"),
    key("lyapunov.candidate", Kind::Text, None, "exp-potential:a | power-radial:a | exp-radial:a,q,m | kinetic-exp | expr:<V>"),
    key("lyapunov.phi", Kind::Text, Some("linear:1"), "linear:a | logpower:c,r | expr:<phi(u)>"),
    key("lyapunov.b", Kind::Float, None, "drift constant; fitted from the grid when absent"),
    key("lyapunov.set", Kind::Text, None, "sublevel:theta | ball:r | empty; fitted when absent"),
    key("lyapunov.half_width", Kind::Float, Some("6"), "verification box"),
    key("lyapunov.n", Kind::Int, Some("401"), "verification nodes per axis"),
    key("poincare.u", Kind::Floats, None, "local Poincare set U = [lo, hi]"),
    key("poincare.divergence", Kind::Choice(&["yes", "no"]), Some("no"), "run the box-doubling Muckenhoupt test"),
    key("rates.t", Kind::Range, Some("0..10..101"), "time grid for psi and xi"),
    key("rates.s", Kind::Range, Some("1e-8..1e-3..41"), "log-spaced s grid for beta_W"),
    key("rates.c_w", Kind::Float, Some("1"), "C_w used for xi when no certificate supplies one"),
    key("rates.r_floor", Kind::Float, Some("1e-24"), "smallest r tabulated for xi"),
    key("rates.xi_convention", Kind::Choice(&["t", "2t"]), Some("t"), "xi time convention"),
    key("evolve.start", Kind::Floats, Some("1.5,0.5"), "Gaussian start (centre, sigma) for oracle traces"),
    key("evolve.horizon", Kind::Float, Some("8"), "oracle horizon"),
    key("evolve.points", Kind::Int, Some("81"), "oracle output times"),
    key("evolve.dt", Kind::Float, Some("0.01"), "oracle time step"),
    key("simulate.particles", Kind::Int, Some("4000"), "Monte Carlo ensemble size"),
    key("simulate.dt", Kind::Float, Some("0.005"), "Euler-Maruyama step"),
    key("simulate.horizon", Kind::Float, Some("3"), "ensemble horizon"),
    key("simulate.points", Kind::Int, Some("16"), "ensemble output times"),
    key("simulate.bins", Kind::Int, Some("64"), "histogram bins per axis"),
    key("simulate.box", Kind::Float, Some("6"), "histogram half-width in x"),
    key("simulate.box_v", Kind::Float, Some("4"), "histogram half-width in v (kinetic)"),
    key("simulate.start", Kind::Floats, Some("2,0.2"), "Gaussian start (centre, sigma)"),
    key("simulate.path_horizon", Kind::Float, Some("200"), "autocovariance path length"),
    key("simulate.path_dt", Kind::Float, Some("0.001"), "autocovariance step"),
    key("simulate.lags", Kind::Range, Some("0..2..21"), "autocovariance lags"),
    key("kinetic.c", Kind::Float, None, "liminf <grad G, grad F>/2; estimated when absent"),
    key("kinetic.kappa", Kind::Float, None, "sup |grad G|^2/(1+|<grad F, grad G>|); estimated when absent"),
    key("kinetic.delta", Kind::Float, Some("16.5"), "smoothing of G = sqrt(delta^2 + |x|^2)"),
    key("kinetic.estimate_half_width", Kind::Float, Some("40"), "box for estimating c and kappa"),
    key("kinetic.half_width", Kind::Float, Some("6"), "certificate box in x and v"),
    key("kinetic.n", Kind::Int, Some("121"), "certificate nodes per axis"),
    key("kinetic.pde_n", Kind::Int, Some("81"), "kinetic oracle cells per axis"),
    key("kinetic.pde_half_width", Kind::Float, Some("6"), "kinetic oracle box"),
    key("kinetic.start", Kind::Floats, Some("1.5,0,0.7071067811865476"), "shifted Gaussian (x0, v0, sigma)"),
];

pub fn spec(key: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.key == key)
}

/// Raw values by key, with the line each came from (0 for overrides).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(inner) = line.strip_prefix('[') {
                let name = inner
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("line {line_no}: unterminated section header")))?
                    .trim();
                section = if name.is_empty() { String::new() } else { format!("{name}.") };
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line_no}: expected key = value")))?;
            // a dotted key is absolute even inside a section
            let k = k.trim();
            let full = if k.contains('.') { k.to_string() } else { format!("{section}{k}") };
            if cfg.values.contains_key(&full) {
                return Err(CliError::Config(format!("line {line_no}: duplicate key `{full}`")));
            }
            cfg.set_at(&full, v.trim(), line_no)?;
        }
        Ok(cfg)
    }

    /// Overlays every key set in `other`.
    pub fn merge(&mut self, other: &Config) -> Result<(), CliError> {
        for (k, (v, line)) in &other.values {
            self.set_at(k, v, *line)?;
        }
        Ok(())
    }

    /// Sets or replaces a key after validation.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        self.set_at(key, value, 0)
    }

    fn set_at(&mut self, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        let where_ = if line > 0 { format!("line {line}: ") } else { String::new() };
        let s = spec(key).ok_or_else(|| CliError::Config(format!("{where_}unknown key `{key}`")))?;
        check_kind(s, value).map_err(|m| CliError::Config(format!("{where_}`{key}`: {m}")))?;
        self.values.insert(key.to_string(), (value.to_string(), line));
        Ok(())
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    /// Explicit value or schema default.
    pub fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(spec(key).is_some(), "{key} not in schema");
        self.values
            .get(key)
            .map(|(v, _)| v.as_str())
            .or_else(|| spec(key).and_then(|s| s.default))
    }

    pub fn text(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    pub fn require(&self, key: &str) -> Result<String, CliError> {
        self.text(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        self.raw(key).and_then(|v| v.parse().ok())
    }

    pub fn float_or(&self, key: &str) -> Result<f64, CliError> {
        self.float(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn int(&self, key: &str) -> Result<usize, CliError> {
        self.raw(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    pub fn floats(&self, key: &str) -> Option<Vec<f64>> {
        self.raw(key).map(|v| parse_floats(v).expect("validated on load"))
    }

    pub fn range(&self, key: &str) -> Result<Range, CliError> {
        let v = self.require(key)?;
        Ok(parse_range(&v).expect("validated on load"))
    }

    pub fn flag(&self, key: &str) -> bool {
        self.raw(key) == Some("yes")
    }

    /// Every schema key with its effective value, one `key = value` per line.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        for s in SCHEMA {
            let v = match (self.values.get(s.key), s.default) {
                (Some((v, _)), _) => v.clone(),
                (None, Some(d)) => d.to_string(),
                (None, None) => "<unset>".to_string(),
            };
            out.push_str(&format!("{} = {v}\n", s.key));
        }
        out
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a)
}

/// Inclusive grid `lo..hi` with `points` entries (default 101).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Range {
    pub fn linear(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + h * i as f64).collect()
    }

    pub fn log(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        if self.points == 1 {
            return vec![self.lo];
        }
        let h = (b - a) / (self.points - 1) as f64;
        (0..self.points).map(|i| (a + h * i as f64).exp()).collect()
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}..{}", self.lo, self.hi, self.points)
    }
}

pub fn parse_range(v: &str) -> Result<Range, String> {
    let parts: Vec<&str> = v.split("..").map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("'{s}' is not a number"));
    let (lo, hi, points) = match parts.as_slice() {
        [lo, hi] => (num(lo)?, num(hi)?, 101),
        [lo, hi, n] => (num(lo)?, num(hi)?, n.parse::<usize>().map_err(|_| format!("'{n}' is not a count"))?),
        _ => return Err(format!("'{v}' is not lo..hi or lo..hi..points")),
    };
    if !(lo.is_finite() && hi.is_finite() && lo <= hi && points >= 1) {
        return Err(format!("'{v}' needs finite lo <= hi and points >= 1"));
    }
    Ok(Range { lo, hi, points })
}

pub fn parse_floats(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", s.trim())))
        .collect()
}

fn check_kind(s: &KeySpec, v: &str) -> Result<(), String> {
    match s.kind {
        Kind::Text => {
            if v.is_empty() {
                return Err("empty value".into());
            }
        }
        Kind::Float => {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("'{v}' is not a finite number"))?;
        }
        Kind::Int => {
            v.parse::<usize>().map_err(|_| format!("'{v}' is not a non-negative integer"))?;
        }
        Kind::Range => {
            parse_range(v)?;
        }
        Kind::Floats => {
            parse_floats(v)?;
        }
        Kind::Choice(opts) => {
            if !opts.contains(&v) {
                return Err(format!("'{v}' is not one of {}", opts.join(", ")));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_dotted_keys_and_defaults() {
        let c = Config::parse("name = x # trailing\npotential = quadratic:1\n[lyapunov]\nphi = linear:2\n\nsimulate.dt = 0.01\n").unwrap();
        assert_eq!(c.text("lyapunov.phi").unwrap(), "linear:2");
        assert_eq!(c.float("simulate.dt"), Some(0.01));
        assert_eq!(c.int("grid.n").unwrap(), 1601);
        assert!(c.resolved().contains("lyapunov.b = <unset>\n"));
        assert_eq!(c.range("rates.t").unwrap().linear().len(), 101);
    }

    #[test]
    fn schema_violations_name_the_key() {
        let e = Config::parse("potentail = quadratic:1").unwrap_err();
        assert!(e.to_string().contains("`potentail`") && e.exit_code() == 2);
        let e = Config::parse("grid.n = many").unwrap_err();
        assert!(e.to_string().contains("line 1") && e.to_string().contains("grid.n"));
        assert!(Config::parse("generator = langevin").is_err());
        assert!(Config::parse("dim = 1\ndim = 2").is_err());
        let e = Config::parse("name = a").unwrap().require("potential").unwrap_err();
        assert!(e.to_string().contains("`potential`"));
    }

    #[test]
    fn ranges() {
        let r = parse_range("1e-8..1e-3..6").unwrap();
        let l = r.log();
        assert!((l[1] / l[0] - 10.0).abs() < 1e-9);
        assert_eq!(parse_range("0..10").unwrap().linear()[100], 10.0);
        assert!(parse_range("3..1").is_err());
    }
}
