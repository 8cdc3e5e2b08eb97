use super::table::{render_csv, render_text, Row};
use super::{Artifact, CliError, Config, Outcome, RunOptions};
use crate::generators::{Generator, Smooth};
use crate::lyapunov::{
    certify_kinetic, estimate_kinetic_constants, fit_drift_params, integrated_drift, kinetic_param_search,
    verify_drift, AuxG, DriftCertificate, DriftSet, FittedDrift, GridSpec, IntegratedDrift, KineticChoice,
    KineticConstants, LyapunovCandidate, PhiFamily, PhiSpec, DEFAULT_ANNULUS,
};
use crate::montecarlo::{
    autocovariance_trace, ensemble_density_trace, fit_rate, DecayTrace, DensityTraces, Ensemble, HistogramSpec,
    InitialLaw, RateFit, RateModel, TraceKind,
};
use crate::potentials::{sample_1d, GibbsMeasure, Potential, PotentialForm, DEFAULT_DELTA};
use crate::rates::{
    clp, cw, halved_linear, halved_phi, is_monotone, BetaValue, BetaWDef, ConstantCase, ConstantResult, PsiProfile,
    RateError, XiProfile,
};
use crate::scalar::{linear_fit, linspace};
use crate::spectral::{
    detect_no_poincare, discretize, fit_decay_window, fmt17, local_poincare, muckenhoupt, semigroup_evolve,
    shifted_gaussian_density, spectral_gap, DiscretizedGenerator, DivergenceReport, EvolveOptions, Kinetic2d,
    LocalPoincare, MuckenhouptReport, SemigroupTrace, SpectralReport, WindowFit,
};

fn num_arg(s: &str, what: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Config(format!("{what}: '{s}' is not a number")))
}

/// `quadratic[:k]`, `power:p[,delta]`, `heavytail:p` or `expr:<F over x1..xd>`.
pub fn build_potential(cfg: &Config) -> Result<Potential<f64>, CliError> {
    let text = cfg.require("potential")?;
    let dim = cfg.int("dim")?;
    if dim == 0 {
        return Err(CliError::Config("`dim` must be at least 1".into()));
    }
    let (kind, rest) = text.split_once(':').unwrap_or((text.as_str(), ""));
    let what = "potential";
    Ok(match kind.trim() {
        "quadratic" => Potential::quadratic(dim, if rest.trim().is_empty() { 1.0 } else { num_arg(rest, what)? }),
        "power" => {
            let (p, delta) = match rest.split_once(',') {
                Some((p, d)) => (num_arg(p, what)?, num_arg(d, what)?),
                None => (num_arg(rest, what)?, DEFAULT_DELTA),
            };
            Potential::power(dim, p, delta)
        }
        "heavytail" => Potential::heavy_tail(dim, num_arg(rest, what)?),
        "expr" => Potential::parse(rest, dim).map_err(|e| CliError::Config(format!("potential: {e}")))?,
        other => {
            return Err(CliError::Config(format!(
                "potential: unknown kind '{other}' (quadratic, power, heavytail, expr)"
            )))
        }
    })
}

fn is_kinetic(cfg: &Config) -> bool {
    cfg.raw("generator") == Some("kinetic")
}

pub fn build_generator(cfg: &Config) -> Result<Generator<f64>, CliError> {
    let f = build_potential(cfg)?;
    Ok(if is_kinetic(cfg) { Generator::kinetic(f) } else { Generator::overdamped(f) })
}

fn build_measure(cfg: &Config, pot: &Potential<f64>) -> Result<GibbsMeasure<f64>, CliError> {
    GibbsMeasure::normalize(pot, cfg.float_or("measure.half_width")?, cfg.int("measure.n")?).map_err(CliError::num)
}

fn build_phi(cfg: &Config) -> Result<PhiSpec<f64>, CliError> {
    let text = cfg.require("lyapunov.phi")?;
    PhiSpec::parse(&text).map_err(|e| CliError::Config(format!("lyapunov.phi: {e}")))
}

fn aux_g(cfg: &Config, dim: usize) -> Result<AuxG<f64>, CliError> {
    Ok(AuxG::smoothed_norm(dim, cfg.float_or("kinetic.delta")?))
}

/// Candidates other than `kinetic-exp`, which needs the parameter search first.
fn build_candidate(cfg: &Config, pot: &Potential<f64>) -> Result<Option<LyapunovCandidate<f64>>, CliError> {
    let Some(text) = cfg.text("lyapunov.candidate") else {
        return Ok(None);
    };
    let dim = pot.dim();
    let (kind, rest) = text.split_once(':').unwrap_or((text.as_str(), ""));
    let what = "lyapunov.candidate";
    let bad = |e: crate::lyapunov::LyapunovError| CliError::Config(format!("{what}: {e}"));
    Ok(Some(match kind.trim() {
        "exp-potential" => LyapunovCandidate::exp_potential(pot.clone(), num_arg(rest, what)?),
        "power-radial" => LyapunovCandidate::power_radial(dim, num_arg(rest, what)?),
        "exp-radial" => {
            let v: Vec<f64> = rest.split(',').map(|s| num_arg(s, what)).collect::<Result<_, _>>()?;
            let [a, q, m] = v[..] else {
                return Err(CliError::Config(format!("{what}: exp-radial needs a,q,m")));
            };
            LyapunovCandidate::exp_radial(dim, a, q, m).map_err(bad)?
        }
        "expr" => LyapunovCandidate::custom(rest, dim).map_err(bad)?,
        "kinetic-exp" => return Ok(None),
        other => {
            return Err(CliError::Config(format!(
                "{what}: unknown kind '{other}' (exp-potential, power-radial, exp-radial, kinetic-exp, expr)"
            )))
        }
    }))
}

fn build_set(text: &str) -> Result<DriftSet<f64>, CliError> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let what = "lyapunov.set";
    match kind.trim() {
        "sublevel" => Ok(DriftSet::Sublevel { theta: num_arg(rest, what)? }),
        "ball" => Ok(DriftSet::Ball { radius: num_arg(rest, what)? }),
        "empty" => Ok(DriftSet::Empty),
        other => Err(CliError::Config(format!("{what}: unknown kind '{other}' (sublevel, ball, empty)"))),
    }
}

fn csv_line(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| fmt17(*v)).collect();
    cells.join(",") + "\n"
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "VALID"
    } else {
        "INVALID"
    }
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub certificate: DriftCertificate<f64>,
    /// `(θ₀, θ, constant)` when the certificate was fitted.
    pub fitted: Option<(f64, f64, f64)>,
    pub integrated: Option<IntegratedDrift<f64>>,
}

fn from_fit(f: FittedDrift<f64>) -> (DriftCertificate<f64>, Option<(f64, f64, f64)>) {
    (f.certificate, Some((f.theta0, f.theta, f.constant)))
}

fn kinetic_choice(cfg: &Config, pot: &Potential<f64>) -> Result<(KineticConstants<f64>, f64, f64), CliError> {
    let g = aux_g(cfg, pot.dim())?;
    let est = estimate_kinetic_constants(
        pot,
        &g,
        cfg.float_or("kinetic.estimate_half_width")?,
        801,
        DEFAULT_ANNULUS,
    )
    .map_err(CliError::num)?;
    let c = cfg.float("kinetic.c").unwrap_or(est.c);
    let kappa = cfg.float("kinetic.kappa").unwrap_or(est.kappa);
    Ok((est, c, kappa))
}

/// Builds and checks the configured certificate. `mu` enables the integrated-drift check.
pub fn verify_scenario(cfg: &Config, mu: Option<&GibbsMeasure<f64>>) -> Result<VerifyOutcome, CliError> {
    let pot = build_potential(cfg)?;
    let gen = build_generator(cfg)?;
    let kind = cfg.require("lyapunov.candidate")?;
    let phi = build_phi(cfg)?;
    let (certificate, fitted) = if kind.trim() == "kinetic-exp" {
        let (_, c, kappa) = kinetic_choice(cfg, &pot)?;
        let choice = kinetic_param_search(c, kappa, pot.dim()).map_err(CliError::num)?;
        let grid = GridSpec::cube(2 * pot.dim(), cfg.float_or("kinetic.half_width")?, cfg.int("kinetic.n")?);
        from_fit(certify_kinetic(&pot, &aux_g(cfg, pot.dim())?, &choice, &grid).map_err(CliError::num)?)
    } else {
        let cand = build_candidate(cfg, &pot)?.expect("candidate present");
        let dim = if is_kinetic(cfg) { 2 * pot.dim() } else { pot.dim() };
        if cand.dim() != dim {
            return Err(CliError::Config(format!(
                "lyapunov.candidate lives in {} dimensions, the generator in {dim}",
                cand.dim()
            )));
        }
        let grid = GridSpec::cube(dim, cfg.float_or("lyapunov.half_width")?, cfg.int("lyapunov.n")?);
        match cfg.float("lyapunov.b") {
            Some(b) => {
                let set = build_set(&cfg.text("lyapunov.set").ok_or_else(|| {
                    CliError::Config("missing required key `lyapunov.set` (needed with lyapunov.b)".into())
                })?)?;
                (verify_drift(&gen, &cand, &phi, b, set, &grid).map_err(CliError::num)?, None)
            }
            None => {
                let family = match phi {
                    PhiSpec::Linear(_) => PhiFamily::Linear,
                    other => PhiFamily::Scaled(other),
                };
                from_fit(fit_drift_params(&gen, &cand, &family, &grid).map_err(CliError::num)?)
            }
        }
    };
    let linear = matches!(certificate.phi, PhiSpec::Linear(_)) && certificate.valid;
    let integrated = if !linear {
        None
    } else if certificate.candidate.is_kinetic() {
        kinetic_integrated(cfg, &pot, &certificate)?
    } else {
        match mu {
            Some(mu) if mu.dim() == certificate.candidate.dim() => {
                Some(integrated_drift(&certificate, mu).map_err(CliError::num)?)
            }
            _ => None,
        }
    };
    Ok(VerifyOutcome {
        certificate,
        fitted,
        integrated,
    })
}

fn verify_outcome(v: &VerifyOutcome) -> Outcome {
    let c = &v.certificate;
    let mut text = c.report();
    if let Some((t0, t, k)) = v.fitted {
        text.push_str(&format!("fitted: theta0 = {}, theta = {}, constant = {}\n", fmt17(t0), fmt17(t), fmt17(k)));
    }
    let mut rows = vec![Row::new("drift certificate")
        .oracle(c.worst_margin)
        .note(format!("{} (worst margin, tol {:.1e})", verdict(c.valid), c.tol))];
    if let Some(i) = v.integrated {
        text.push_str(&format!(
            "integrated drift: alpha int V dmu = {} <= b mu(C) = {} (tail {}): {}\n",
            fmt17(i.lhs),
            fmt17(i.rhs),
            fmt17(i.tail),
            i.holds(1e-4)
        ));
        rows.push(
            Row::new("integrated drift alpha*int V")
                .theory(i.rhs)
                .oracle(i.lhs)
                .note(format!("holds = {} (slack 1e-4)", i.holds(1e-4))),
        );
    }
    let dim = c.grid.dim();
    let mut csv: String = (1..=dim).map(|k| format!("x{k},")).collect();
    csv.push_str("margin\n");
    for (k, m) in c.margins.iter().enumerate() {
        let mut row = c.grid.point(k);
        row.push(*m);
        csv.push_str(&csv_line(&row));
    }
    Outcome {
        artifacts: vec![
            Artifact { name: "certificate.txt".into(), body: text },
            Artifact { name: "drift_margins.csv".into(), body: csv },
        ],
        rows,
        summary: vec![format!("certificate {}: worst margin {:.4e}", verdict(c.valid), c.worst_margin)],
    }
}

pub(super) fn verify(cfg: &Config) -> Result<Outcome, CliError> {
    let pot = build_potential(cfg)?;
    let mu = if !is_kinetic(cfg) && pot.dim() == 1 { Some(build_measure(cfg, &pot)?) } else { None };
    Ok(verify_outcome(&verify_scenario(cfg, mu.as_ref())?))
}

/// Integrated drift of a kinetic certificate against the joint law `e^{-2F(x) - v^2}` (d = 1).
fn kinetic_integrated(
    cfg: &Config,
    pot: &Potential<f64>,
    cert: &DriftCertificate<f64>,
) -> Result<Option<IntegratedDrift<f64>>, CliError> {
    if pot.dim() != 1 || !cert.valid || !matches!(cert.phi, PhiSpec::Linear(_)) {
        return Ok(None);
    }
    let joint = GibbsMeasure::normalize(&Potential::phase_space(pot.clone()), cfg.float_or("measure.half_width")?, 401)
        .map_err(CliError::num)?;
    Ok(Some(integrated_drift(cert, &joint).map_err(CliError::num)?))
}

// ---------------------------------------------------------------- local Poincaré and constants

fn local_constant(cfg: &Config, pot: &Potential<f64>) -> Result<Option<LocalPoincare<f64>>, CliError> {
    let Some(u) = cfg.floats("poincare.u") else {
        return Ok(None);
    };
    let [lo, hi] = u[..] else {
        return Err(CliError::Config("poincare.u needs lo,hi".into()));
    };
    if pot.dim() != 1 || is_kinetic(cfg) {
        return Err(CliError::Config("poincare.u needs a 1D overdamped scenario".into()));
    }
    let m = GibbsMeasure::normalize(pot, cfg.float_or("grid.half_width")?, cfg.int("grid.n")?).map_err(CliError::num)?;
    Ok(Some(local_poincare(&m, lo, hi).map_err(CliError::num)?))
}

/// Whether every certificate node with `V ≤ level` (and inside `C` when `within_set`) lies in `U`.
fn u_contains(cert: &DriftCertificate<f64>, lp: &LocalPoincare<f64>, level: &dyn Fn(f64) -> bool, within_set: bool) -> bool {
    (0..cert.grid.len()).all(|k| {
        let x = cert.grid.point(k);
        let Ok(v) = cert.candidate.value(&x) else {
            return true;
        };
        let inside = level(v) && (!within_set || cert.set.contains(&x, v));
        !inside || (x[0] >= lp.lo && x[0] <= lp.hi)
    })
}

fn pick_case(
    cert: &DriftCertificate<f64>,
    lp: &LocalPoincare<f64>,
    level: &dyn Fn(f64) -> bool,
    eval: &dyn Fn(ConstantCase) -> Result<ConstantResult<f64>, RateError>,
) -> Result<ConstantResult<f64>, String> {
    let mut why = Vec::new();
    if u_contains(cert, lp, level, true) {
        match eval(ConstantCase::One) {
            Ok(r) => return Ok(r),
            Err(e) => why.push(format!("case 1: {e}")),
        }
    } else {
        why.push("case 1: U misses part of C".into());
    }
    let contains = u_contains(cert, lp, level, false);
    eval(ConstantCase::Two { contains_sublevel: contains }).map_err(|e| {
        why.push(format!("case 2: {e}"));
        why.join("; ")
    })
}

// ---------------------------------------------------------------- rates

#[derive(Debug, Clone, Default)]
pub struct RatesOutcome {
    pub psi: Vec<(f64, f64)>,
    pub beta: Vec<(f64, BetaValue<f64>)>,
    /// Slopes of `log β_W` against `log log(1/s)` and `log(1/s)`.
    pub beta_slopes: Option<(f64, f64)>,
    /// `(t, log ξ(t))`
    pub xi: Vec<(f64, f64)>,
    pub xi_t_max: Option<f64>,
    pub xi_fit: Option<RateFit<f64>>,
    pub clp: Option<ConstantResult<f64>>,
    pub c_w: Option<ConstantResult<f64>>,
    /// The `C_w` that went into `ξ`.
    pub c_w_used: f64,
    pub notes: Vec<String>,
}

pub fn rates_scenario(
    cfg: &Config,
    opts: &RunOptions,
    cert: Option<&DriftCertificate<f64>>,
    local: Option<&LocalPoincare<f64>>,
    mu: Option<&GibbsMeasure<f64>>,
) -> Result<RatesOutcome, CliError> {
    let mut out = RatesOutcome { c_w_used: cfg.float_or("rates.c_w")?, ..Default::default() };
    let phi = match cert {
        Some(c) => c.phi.clone(),
        None => build_phi(cfg)?,
    };
    let times = cfg.range("rates.t")?.linear();
    match PsiProfile::new(phi.clone()) {
        Ok(prof) => {
            for &t in &times {
                match prof.psi(t) {
                    Ok(v) => out.psi.push((t, v)),
                    Err(e) => {
                        out.notes.push(format!("psi stops at t = {t}: {e}"));
                        break;
                    }
                }
            }
        }
        Err(e) => out.notes.push(format!("psi unavailable: {e}")),
    }

    if let (Some(c), Some(lp)) = (cert, local) {
        let kappa = lp.kappa_numeric * 0.5;
        if let PhiSpec::Linear(_) = c.phi {
            let (alpha, b) = halved_linear(c).map_err(CliError::num)?;
            match pick_case(c, lp, &|v| v <= b / alpha, &|case| clp(alpha, b, kappa, lp.mu_u, case)) {
                Ok(r) => out.clp = Some(r),
                Err(e) => out.notes.push(format!("C_LP unavailable: {e}")),
            }
        }
        let (phi_t, b) = halved_phi(c);
        let level = |v: f64| phi_t.eval(v) <= b;
        match pick_case(c, lp, &level, &|case| cw(&phi_t, b, kappa, lp.mu_u, case)) {
            Ok(r) => {
                out.c_w_used = r.constant;
                out.c_w = Some(r);
            }
            Err(e) => out.notes.push(format!("C_w unavailable, using rates.c_w: {e}")),
        }
    }

    let pot = cfg.text("potential").map(|_| build_potential(cfg)).transpose()?;
    let cand = match (cert, &pot) {
        (Some(c), _) => Some(c.candidate.clone()),
        (None, Some(p)) => build_candidate(cfg, p)?,
        _ => None,
    };
    let nonlinear = !matches!(phi, PhiSpec::Linear(_));
    if let (Some(cand), Some(pot), true) = (cand, &pot, nonlinear) {
        if cand.is_kinetic() || pot.dim() != 1 {
            out.notes.push("beta_W is tabulated for 1D overdamped candidates only".into());
            return Ok(out);
        }
        let owned;
        let mu = match mu {
            Some(m) => m,
            None => {
                owned = build_measure(cfg, pot)?;
                &owned
            }
        };
        let def = match cert {
            Some(c) => BetaWDef::from_certificate(c, mu),
            None => BetaWDef::new(&cand, &phi, mu),
        }
        .map_err(CliError::num)?;
        let s_grid = cfg.range("rates.s")?.log();
        for &s in &s_grid {
            match def.eval(s) {
                Ok(v) => out.beta.push((s, v)),
                Err(e) => out.notes.push(format!("beta_W({s}): {e}")),
            }
        }
        let pts: Vec<(f64, f64)> = out
            .beta
            .iter()
            .filter(|(_, v)| !v.saturated && v.u > 0.0)
            .map(|(s, v)| (*s, v.u.ln()))
            .collect();
        if pts.len() >= 3 {
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let ll: Vec<f64> = pts.iter().map(|p| (1.0 / p.0).ln().ln()).collect();
            let l: Vec<f64> = pts.iter().map(|p| (1.0 / p.0).ln()).collect();
            if let (Some((_, a)), Some((_, b))) = (linear_fit(&ll, &y), linear_fit(&l, &y)) {
                out.beta_slopes = Some((a, b));
            }
        }
        let xi = XiProfile::new(
            |r: f64| def.eval(r).map(|v| v.u),
            out.c_w_used,
            opts.xi_convention,
            cfg.float_or("rates.r_floor")?,
        )
        .map_err(CliError::num)?;
        let t_max = xi.t_max();
        out.xi_t_max = Some(t_max);
        for &t in times.iter().filter(|t| **t > 0.0) {
            if t > t_max {
                out.notes.push(format!("xi table stops at t_max = {t_max:.6e}"));
                break;
            }
            out.xi.push((t, xi.log_xi(t).map_err(CliError::num)?));
        }
        // stretch exponent over the upper two decades of the table
        let fit_t = linspace(t_max / 100.0, 0.99 * t_max, 100);
        let values: Vec<f64> = fit_t.iter().map(|t| xi.xi(*t)).collect::<Result<_, _>>().map_err(CliError::num)?;
        let trace = DecayTrace {
            kind: TraceKind::Variance,
            stderr: vec![0.0; fit_t.len()],
            times: fit_t,
            values,
            notes: vec!["xi".into()],
        };
        match fit_rate(&trace, RateModel::Subgeometric { delta: None }, (0.0, t_max)) {
            Ok(f) => out.xi_fit = Some(f),
            Err(e) => out.notes.push(format!("xi fit: {e}")),
        }
    }
    Ok(out)
}

fn theory_exponents(cfg: &Config, pot: &Potential<f64>) -> (Option<f64>, Option<f64>, Option<f64>) {
    // (β_W log-log slope, β_W log slope, ξ stretch exponent)
    let cand = cfg.text("lyapunov.candidate").unwrap_or_default();
    match pot.form() {
        PotentialForm::Power { p, .. } if *p < 1.0 => (Some(2.0 / p - 2.0), None, Some(p / (2.0 - p))),
        PotentialForm::HeavyTail { p } => {
            let e = cand.strip_prefix("power-radial:").and_then(|s| s.trim().parse::<f64>().ok());
            (None, e.map(|e| 2.0 / (p - e)), None)
        }
        _ => (None, None, None),
    }
}

fn rates_outcome(r: &RatesOutcome, theory: (Option<f64>, Option<f64>, Option<f64>)) -> Outcome {
    let mut artifacts = Vec::new();
    let mut rows = Vec::new();
    if !r.psi.is_empty() {
        let mut s = String::from("t,psi\n");
        for (t, v) in &r.psi {
            s.push_str(&csv_line(&[*t, *v]));
        }
        artifacts.push(Artifact { name: "psi.csv".into(), body: s });
    }
    if !r.beta.is_empty() {
        let mut s = String::from("s,beta_w,tail_error,saturated\n");
        for (x, v) in &r.beta {
            s.push_str(&format!("{},{},{},{}\n", fmt17(*x), fmt17(v.u), fmt17(v.tail_error), v.saturated));
        }
        artifacts.push(Artifact { name: "beta_w.csv".into(), body: s });
    }
    if let Some((ll, l)) = r.beta_slopes {
        let mut row = Row::new("beta_W slope vs loglog(1/s)").oracle(ll);
        if let Some(t) = theory.0 {
            row = row.theory(t);
        }
        rows.push(row);
        let mut row = Row::new("beta_W slope vs log(1/s)").oracle(l);
        if let Some(t) = theory.1 {
            row = row.theory(t);
        }
        rows.push(row);
    }
    if !r.xi.is_empty() {
        let mut s = String::from("t,xi,log_xi\n");
        for (t, lx) in &r.xi {
            s.push_str(&csv_line(&[*t, lx.exp(), *lx]));
        }
        artifacts.push(Artifact { name: "xi.csv".into(), body: s });
    }
    if let Some(f) = &r.xi_fit {
        let mut row = Row::new("xi stretch exponent").oracle(f.delta).note(format!("R^2 = {:.4}", f.r_squared));
        if let Some(t) = theory.2 {
            row = row.theory(t);
        }
        rows.push(row);
    }
    let mut text = String::new();
    if let Some(c) = &r.clp {
        text.push_str(&format!("C_LP = {} lambda = {} case = {:?}\n", fmt17(c.constant), fmt17(c.lambda), c.case));
        rows.push(Row::new("C_LP").theory(c.constant).note(format!("lambda = {:.4e}, {:?}", c.lambda, c.case)));
    }
    if let Some(c) = &r.c_w {
        text.push_str(&format!("C_w = {} lambda = {} case = {:?}\n", fmt17(c.constant), fmt17(c.lambda), c.case));
        rows.push(Row::new("C_w").theory(c.constant));
    }
    text.push_str(&format!("C_w used for xi = {}\n", fmt17(r.c_w_used)));
    if let Some(t) = r.xi_t_max {
        text.push_str(&format!("xi t_max = {}\n", fmt17(t)));
    }
    for n in &r.notes {
        text.push_str(&format!("note: {n}\n"));
    }
    artifacts.push(Artifact { name: "constants.txt".into(), body: text });
    Outcome {
        artifacts,
        rows,
        summary: r.notes.clone(),
    }
}

pub(super) fn rates(cfg: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let pot = cfg.text("potential").map(|_| build_potential(cfg)).transpose()?;
    let (cert, local, mu) = match &pot {
        Some(p) if !is_kinetic(cfg) && p.dim() == 1 && cfg.is_set("lyapunov.candidate") => {
            let mu = build_measure(cfg, p)?;
            let v = verify_scenario(cfg, Some(&mu))?;
            (Some(v.certificate), local_constant(cfg, p)?, Some(mu))
        }
        _ => (None, None, None),
    };
    let r = rates_scenario(cfg, opts, cert.as_ref(), local.as_ref(), mu.as_ref())?;
    let theory = pot.as_ref().map(|p| theory_exponents(cfg, p)).unwrap_or((None, None, None));
    Ok(rates_outcome(&r, theory))
}

// ---------------------------------------------------------------- spectral

#[derive(Debug, Clone)]
pub struct SpectralOutcome {
    pub report: SpectralReport<f64>,
    pub muckenhoupt: MuckenhouptReport<f64>,
    pub divergence: Option<DivergenceReport<f64>>,
    pub local: Option<LocalPoincare<f64>>,
    /// Density trace from the configured Gaussian start, weighted by `W` when given.
    pub trace: SemigroupTrace<f64>,
    pub variance_fit: Option<WindowFit<f64>>,
    pub weighted_fit: Option<WindowFit<f64>>,
    pub psi_nonincreasing: bool,
}

/// Gap, Muckenhoupt bracket and an oracle trace. `weight = (V, λ)` sets `W = V + λ`.
pub fn spectral_scenario(
    cfg: &Config,
    mu: &GibbsMeasure<f64>,
    weight: Option<(&LyapunovCandidate<f64>, f64)>,
) -> Result<SpectralOutcome, CliError> {
    let pot = build_potential(cfg)?;
    if is_kinetic(cfg) || pot.dim() != 1 {
        return Err(CliError::Config(
            "spectral needs a 1D overdamped scenario; use `kinetic` for the phase-space oracle".into(),
        ));
    }
    let r = cfg.float_or("grid.half_width")?;
    let n = cfg.int("grid.n")?;
    let d = discretize(&Generator::overdamped(pot.clone()), &[r], n).map_err(CliError::num)?;
    let report = spectral_gap(&d).map_err(CliError::num)?;
    let muck = muckenhoupt(mu, None).map_err(CliError::num)?;
    let divergence = if cfg.flag("poincare.divergence") {
        Some(detect_no_poincare(&pot, 10.0, 0.1, 5).map_err(CliError::num)?)
    } else {
        None
    };
    let local = local_constant(cfg, &pot)?;
    let DiscretizedGenerator::Reversible1d(grid) = &d else {
        unreachable!("1D overdamped discretisation")
    };
    let start = cfg.floats("evolve.start").unwrap_or_default();
    let [c, sigma] = start[..] else {
        return Err(CliError::Config("evolve.start needs centre,sigma".into()));
    };
    let x = grid.nodes();
    let logs: Vec<f64> = x
        .iter()
        .map(|xi| -(xi - c) * (xi - c) / (2.0 * sigma * sigma) + 2.0 * pot.value(&[*xi]).unwrap_or(f64::INFINITY))
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut u0: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mass: f64 = u0.iter().zip(grid.mass()).map(|(a, b)| a * b).sum();
    u0.iter_mut().for_each(|v| *v /= mass);
    let mut opts = EvolveOptions::density(cfg.float_or("evolve.dt")?);
    if let Some((v, lambda)) = weight {
        let w: Vec<f64> = x
            .iter()
            .map(|xi| v.value(&[*xi]).map(|v| v + lambda))
            .collect::<Result<_, _>>()
            .map_err(CliError::num)?;
        opts = opts.with_weight(w);
    }
    let times = linspace(0.0, cfg.float_or("evolve.horizon")?, cfg.int("evolve.points")?);
    let trace = semigroup_evolve(&d, &u0, &times, &opts).map_err(CliError::num)?;
    let variance_fit = fit_decay_window(&trace.times, &trace.variance, 1e-8, 0.5);
    let weighted_fit = weight.and_then(|_| fit_decay_window(&trace.times, &trace.weighted_variance, 1e-8, 0.5));
    let scale = trace.psi_functional.first().copied().unwrap_or(0.0).abs().max(1e-300);
    let psi_nonincreasing = is_monotone(&trace.psi_functional, false, 1e-12 * scale);
    Ok(SpectralOutcome {
        report,
        muckenhoupt: muck,
        divergence,
        local,
        trace,
        variance_fit,
        weighted_fit,
        psi_nonincreasing,
    })
}

fn spectral_outcome(s: &SpectralOutcome, clp: Option<f64>) -> Outcome {
    let r = &s.report;
    let m = &s.muckenhoupt;
    let mut text = format!(
        "box = [-{}, {}], n = {}\ngap = {}\nC_P = {}\ngap (2n-1 grid) = {}\ngap extrapolated = {}\nrichardson error = {}\nno gap = {}\n",
        fmt17(r.half_width),
        fmt17(r.half_width),
        r.n,
        fmt17(r.gap),
        fmt17(r.c_p),
        fmt17(r.gap_refined),
        fmt17(r.gap_extrapolated),
        fmt17(r.richardson_error),
        r.no_gap
    );
    text.push_str(&format!(
        "muckenhoupt: median = {}, B = {}, bracket = [{}, {}]\n",
        fmt17(m.median),
        fmt17(m.b),
        fmt17(m.lower),
        fmt17(m.upper)
    ));
    let mut rows = vec![
        Row::new("C_P").oracle(r.c_p).note(format!("gap {:.6e}", r.gap)),
        Row::new("Muckenhoupt bracket").theory(m.lower).oracle(m.upper).note(format!(
            "C_P inside = {}",
            m.lower <= r.c_p && r.c_p <= m.upper
        )),
    ];
    if let Some(dv) = &s.divergence {
        text.push_str(&format!("no-Poincare test: diverges = {}\n", dv.diverges));
        for ((h, b), q) in dv.half_widths.iter().zip(&dv.b).zip(std::iter::once(&f64::NAN).chain(&dv.ratios)) {
            text.push_str(&format!("  R = {} B = {} ratio = {}\n", fmt17(*h), fmt17(*b), fmt17(*q)));
        }
        rows.push(Row::new("Muckenhoupt divergence").oracle(*dv.ratios.last().unwrap_or(&f64::NAN)).note(format!(
            "diverges = {}",
            dv.diverges
        )));
    }
    if let Some(lp) = &s.local {
        text.push_str(&format!(
            "local Poincare on [{}, {}]: mu(U) = {}, kappa = {}, bound = {}\n",
            fmt17(lp.lo),
            fmt17(lp.hi),
            fmt17(lp.mu_u),
            fmt17(lp.kappa_numeric),
            fmt17(lp.kappa_bound)
        ));
    }
    if let Some(f) = &s.variance_fit {
        text.push_str(&format!("variance decay rate = {} (R^2 {})\n", fmt17(f.rate), fmt17(f.r_squared)));
        rows.push(Row::new("variance decay rate").theory(2.0 / r.c_p).oracle(f.rate));
    }
    if let Some(f) = &s.weighted_fit {
        text.push_str(&format!("weighted variance decay rate = {} (R^2 {})\n", fmt17(f.rate), fmt17(f.r_squared)));
        let mut row = Row::new("weighted variance rate").oracle(f.rate).note("theory is a lower bound");
        if let Some(c) = clp {
            row = row.theory(1.0 / c);
        }
        rows.push(row);
    }
    text.push_str(&format!("psi functional non-increasing = {}\n", s.psi_nonincreasing));
    rows.push(Row::new("psi functional").note(format!("non-increasing = {}", s.psi_nonincreasing)));
    Outcome {
        artifacts: vec![
            Artifact { name: "spectral.txt".into(), body: text },
            Artifact { name: "semigroup.csv".into(), body: s.trace.to_csv() },
        ],
        rows,
        summary: vec![format!("C_P = {:.6}", r.c_p)],
    }
}

pub(super) fn spectral(cfg: &Config) -> Result<Outcome, CliError> {
    let pot = build_potential(cfg)?;
    let mu = build_measure(cfg, &pot)?;
    let s = spectral_scenario(cfg, &mu, None)?;
    Ok(spectral_outcome(&s, None))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub autocov: Option<DecayTrace<f64>>,
    pub autocov_fit: Option<RateFit<f64>>,
    pub density: DensityTraces<f64>,
    pub entropy_fit: Option<RateFit<f64>>,
    pub notes: Vec<String>,
}

/// `mu` is the position marginal.
pub fn simulate_scenario(cfg: &Config, opts: &RunOptions, mu: &GibbsMeasure<f64>) -> Result<SimulateOutcome, CliError> {
    let gen = build_generator(cfg)?;
    let kinetic = is_kinetic(cfg);
    if mu.dim() != 1 {
        return Err(CliError::Config("simulate supports d = 1".into()));
    }
    let mut notes = Vec::new();
    let (autocov, autocov_fit) = if kinetic {
        (None, None)
    } else {
        let x0 = sample_1d(mu, 1, opts.seed).map_err(CliError::num)?;
        let lags = cfg.range("simulate.lags")?.linear();
        let tr = autocovariance_trace(
            &gen,
            |x: &[f64]| x[0],
            &x0,
            cfg.float_or("simulate.path_dt")?,
            cfg.float_or("simulate.path_horizon")?,
            &lags,
            opts.seed ^ 0xA5A5_A5A5,
        )
        .map_err(CliError::num)?;
        let last = tr.values.iter().position(|v| *v <= 0.0).unwrap_or(tr.values.len());
        let fit = if last >= 10 {
            match fit_rate(&tr, RateModel::Geometric, (0.0, tr.times[last - 1])) {
                Ok(f) => Some(f),
                Err(e) => {
                    notes.push(format!("autocovariance fit: {e}"));
                    None
                }
            }
        } else {
            notes.push("autocovariance turns non-positive before 10 lags".into());
            None
        };
        (Some(tr), fit)
    };
    let start = cfg.floats("simulate.start").unwrap_or_default();
    let [c, sigma] = start[..] else {
        return Err(CliError::Config("simulate.start needs centre,sigma".into()));
    };
    let centre = if kinetic { vec![c, 0.0] } else { vec![c] };
    let dt = cfg.float_or("simulate.dt")?;
    let mut ens = Ensemble::for_generator(
        &gen,
        cfg.int("simulate.particles")?,
        dt,
        opts.seed,
        &InitialLaw::Gaussian { centre, sigma },
        None,
    )
    .map_err(CliError::num)?;
    let spec = HistogramSpec::new(cfg.int("simulate.bins")?, cfg.float_or("simulate.box")?, cfg.float_or("simulate.box_v")?);
    let times = linspace(0.0, cfg.float_or("simulate.horizon")?, cfg.int("simulate.points")?);
    let density = ensemble_density_trace(&gen, &mut ens, mu, &spec, &times, None).map_err(CliError::num)?;
    notes.extend(density.entropy.notes.iter().cloned());
    let entropy_fit = match fit_rate(&density.entropy, RateModel::Geometric, (0.0, times[times.len() - 1])) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("entropy fit: {e}"));
            None
        }
    };
    Ok(SimulateOutcome {
        autocov,
        autocov_fit,
        density,
        entropy_fit,
        notes,
    })
}

fn fit_line(name: &str, f: &RateFit<f64>) -> String {
    format!(
        "{name}: rho = {} delta = {} R^2 = {} accepted = {} window = [{}, {}] points = {}\n",
        fmt17(f.rho_raw),
        fmt17(f.delta),
        fmt17(f.r_squared),
        f.rho.is_some(),
        fmt17(f.window.0),
        fmt17(f.window.1),
        f.points
    )
}

fn simulate_outcome(s: &SimulateOutcome, c_p: Option<f64>) -> Outcome {
    let mut artifacts = Vec::new();
    let mut rows = Vec::new();
    let mut text = String::new();
    if let Some(tr) = &s.autocov {
        let mut csv = String::from("t,autocovariance,stderr\n");
        for i in 0..tr.times.len() {
            csv.push_str(&csv_line(&[tr.times[i], tr.values[i], tr.stderr[i]]));
        }
        artifacts.push(Artifact { name: "mc_autocov.csv".into(), body: csv });
    }
    if let Some(f) = &s.autocov_fit {
        text.push_str(&fit_line("autocovariance", f));
        let mut row = Row::new("autocovariance rate").empirical(f.rho_raw).note(format!("R^2 = {:.4}", f.r_squared));
        if let Some(c) = c_p {
            row = row.theory(1.0 / c);
        }
        rows.push(row);
    }
    let d = &s.density;
    let mut csv = String::from("t,entropy,entropy_se,entropy_bias,tv,tv_se,psi_functional,psi_se\n");
    for i in 0..d.entropy.times.len() {
        csv.push_str(&csv_line(&[
            d.entropy.times[i],
            d.entropy.values[i],
            d.entropy.stderr[i],
            d.entropy_bias[i],
            d.tv.values[i],
            d.tv.stderr[i],
            d.psi.values[i],
            d.psi.stderr[i],
        ]));
    }
    artifacts.push(Artifact { name: "mc_density.csv".into(), body: csv });
    if let Some(f) = &s.entropy_fit {
        text.push_str(&fit_line("entropy", f));
        rows.push(Row::new("ensemble entropy rate").empirical(f.rho_raw).note(format!("R^2 = {:.4}", f.r_squared)));
    }
    for n in &s.notes {
        text.push_str(&format!("note: {n}\n"));
    }
    artifacts.push(Artifact { name: "mc_fits.txt".into(), body: text });
    Outcome {
        artifacts,
        rows,
        summary: s.notes.clone(),
    }
}

fn position_measure(cfg: &Config) -> Result<GibbsMeasure<f64>, CliError> {
    let pot = build_potential(cfg)?;
    build_measure(cfg, &pot)
}

pub(super) fn simulate(cfg: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mu = position_measure(cfg)?;
    Ok(simulate_outcome(&simulate_scenario(cfg, opts, &mu)?, None))
}

// ---------------------------------------------------------------- kinetic

#[derive(Debug, Clone)]
pub struct KineticOutcome {
    pub estimated: KineticConstants<f64>,
    pub c: f64,
    pub kappa: f64,
    /// The chosen `(a, b)`, or the binding constraint when the region is empty.
    pub choice: Result<KineticChoice<f64>, String>,
    pub certificate: Option<FittedDrift<f64>>,
    pub integrated: Option<IntegratedDrift<f64>>,
    pub trace: SemigroupTrace<f64>,
    pub geometric: Option<WindowFit<f64>>,
    pub subgeometric: Option<RateFit<f64>>,
    pub notes: Vec<String>,
}

pub fn kinetic_scenario(cfg: &Config) -> Result<KineticOutcome, CliError> {
    let pot = build_potential(cfg)?;
    let d = pot.dim();
    let (estimated, c, kappa) = kinetic_choice(cfg, &pot)?;
    let mut notes = Vec::new();
    let choice = match kinetic_param_search(c, kappa, d) {
        Ok(ch) => Ok(ch),
        Err(crate::lyapunov::LyapunovError::EmptyRegion { binding }) => Err(binding),
        Err(e) => return Err(CliError::num(e)),
    };
    let certificate = match &choice {
        Ok(ch) => {
            let grid = GridSpec::cube(2 * d, cfg.float_or("kinetic.half_width")?, cfg.int("kinetic.n")?);
            match certify_kinetic(&pot, &aux_g(cfg, d)?, ch, &grid) {
                Ok(f) => Some(f),
                Err(e) => {
                    notes.push(format!("certificate: {e}"));
                    None
                }
            }
        }
        Err(_) => None,
    };
    let integrated = match &certificate {
        Some(f) => kinetic_integrated(cfg, &pot, &f.certificate)?,
        None => None,
    };
    let r = cfg.float_or("kinetic.pde_half_width")?;
    let n = cfg.int("kinetic.pde_n")?;
    let k = Kinetic2d::new(&pot, r, r, n, n).map_err(CliError::num)?;
    let start = cfg.floats("kinetic.start").unwrap_or_default();
    let [x0, v0, sigma] = start[..] else {
        return Err(CliError::Config("kinetic.start needs x0,v0,sigma".into()));
    };
    let h0 = shifted_gaussian_density(&k, x0, v0, sigma);
    let times = linspace(0.0, cfg.float_or("evolve.horizon")?, cfg.int("evolve.points")?);
    let disc = DiscretizedGenerator::Kinetic2d(Box::new(k));
    let trace = semigroup_evolve(&disc, &h0, &times, &EvolveOptions::density(cfg.float_or("evolve.dt")?))
        .map_err(CliError::num)?;
    let geometric = fit_decay_window(&trace.times, &trace.entropy, 1e-8, 1e-1);
    let positive = trace.entropy.iter().take_while(|e| **e > 0.0).count();
    let sub_trace = DecayTrace {
        kind: TraceKind::Entropy,
        times: trace.times[1..positive].to_vec(),
        values: trace.entropy[1..positive].to_vec(),
        stderr: vec![0.0; positive.saturating_sub(1)],
        notes: Vec::new(),
    };
    let subgeometric = if positive > 11 {
        fit_rate(&sub_trace, RateModel::Subgeometric { delta: None }, (0.0, f64::INFINITY)).ok()
    } else {
        None
    };
    Ok(KineticOutcome {
        estimated,
        c,
        kappa,
        choice,
        certificate,
        integrated,
        trace,
        geometric,
        subgeometric,
        notes,
    })
}

fn kinetic_outcome(k: &KineticOutcome) -> Outcome {
    let e = &k.estimated;
    let mut text = format!(
        "estimated: c = {} kappa = {} sup|hess G| = {} annulus = {} hessian condition = {}\nused: c = {} kappa = {}\n",
        fmt17(e.c),
        fmt17(e.kappa),
        fmt17(e.hess_g_sup),
        fmt17(e.annulus),
        e.hessian_condition,
        fmt17(k.c),
        fmt17(k.kappa)
    );
    let mut rows = Vec::new();
    match &k.choice {
        Ok(ch) => {
            text.push_str(&format!("feasible: a = {} b = {}\n", fmt17(ch.a), fmt17(ch.b)));
            for c in ch.region.constraints(ch.a, ch.b) {
                text.push_str(&format!(
                    "  {}: {} {} {} ({})\n",
                    c.name,
                    fmt17(c.lhs),
                    if c.strict { "<" } else { "<=" },
                    fmt17(c.rhs),
                    c.holds()
                ));
            }
            rows.push(Row::new("kinetic (a, b)").theory(ch.a).oracle(ch.b).note("feasible"));
        }
        Err(b) => {
            text.push_str(&format!("infeasible: binding constraint {b}\n"));
            rows.push(Row::new("kinetic (a, b)").note(format!("empty region: {b}")));
        }
    }
    if let Some(f) = &k.certificate {
        text.push_str(&f.certificate.report());
        rows.push(
            Row::new("kinetic certificate")
                .oracle(f.certificate.worst_margin)
                .note(format!("{} alpha = {:.4e} b = {:.4e}", verdict(f.certificate.valid), f.constant, f.certificate.b)),
        );
    }
    if let Some(i) = &k.integrated {
        text.push_str(&format!(
            "integrated drift: alpha int V dmu = {} <= b mu(C) = {}: {}\n",
            fmt17(i.lhs),
            fmt17(i.rhs),
            i.holds(1e-4)
        ));
        rows.push(
            Row::new("integrated drift alpha*int V")
                .theory(i.rhs)
                .oracle(i.lhs)
                .note(format!("holds = {} (slack 1e-4)", i.holds(1e-4))),
        );
    }
    if let Some(f) = &k.geometric {
        text.push_str(&format!("entropy geometric rate = {} (R^2 {})\n", fmt17(f.rate), fmt17(f.r_squared)));
        rows.push(Row::new("kinetic entropy rate").oracle(f.rate).note(format!("R^2 = {:.4}", f.r_squared)));
    }
    if let Some(f) = &k.subgeometric {
        text.push_str(&fit_line("entropy subgeometric", f));
        rows.push(Row::new("kinetic entropy stretch").oracle(f.delta).note(format!("R^2 = {:.4}", f.r_squared)));
    }
    for n in &k.notes {
        text.push_str(&format!("note: {n}\n"));
    }
    Outcome {
        artifacts: vec![
            Artifact { name: "kinetic.txt".into(), body: text },
            Artifact { name: "kinetic_entropy.csv".into(), body: k.trace.to_csv() },
        ],
        rows,
        summary: k.notes.clone(),
    }
}

pub(super) fn kinetic(cfg: &Config, _opts: &RunOptions) -> Result<Outcome, CliError> {
    Ok(kinetic_outcome(&kinetic_scenario(cfg)?))
}

// ---------------------------------------------------------------- report

pub(super) fn report(cfg: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let pot = build_potential(cfg)?;
    let mut out = Outcome::default();
    if is_kinetic(cfg) {
        out.absorb(kinetic_outcome(&kinetic_scenario(cfg)?));
        if pot.dim() == 1 {
            let mu = build_measure(cfg, &pot)?;
            out.absorb(simulate_outcome(&simulate_scenario(cfg, opts, &mu)?, None));
        }
    } else {
        if pot.dim() != 1 {
            return Err(CliError::Config("report supports d = 1 overdamped or kinetic scenarios".into()));
        }
        let mu = build_measure(cfg, &pot)?;
        let ver = if cfg.is_set("lyapunov.candidate") { Some(verify_scenario(cfg, Some(&mu))?) } else { None };
        let local = local_constant(cfg, &pot)?;
        let cert = ver.as_ref().map(|v| &v.certificate);
        let r = rates_scenario(cfg, opts, cert, local.as_ref(), Some(&mu))?;
        let weight = match (cert, &r.clp) {
            (Some(c), Some(k)) => Some((&c.candidate, k.lambda)),
            _ => None,
        };
        let s = spectral_scenario(cfg, &mu, weight)?;
        let sim = simulate_scenario(cfg, opts, &mu)?;
        if let Some(v) = &ver {
            out.absorb(verify_outcome(v));
        }
        out.absorb(spectral_outcome(&s, r.clp.map(|c| c.constant)));
        out.absorb(rates_outcome(&r, theory_exponents(cfg, &pot)));
        out.absorb(simulate_outcome(&sim, Some(s.report.c_p)));
    }
    let title = format!("scenario {}\n\n", cfg.raw("name").unwrap_or("custom"));
    out.artifacts.push(Artifact {
        name: "report.txt".into(),
        body: format!("{title}{}", render_text(&out.rows)),
    });
    out.artifacts.push(Artifact { name: "report.csv".into(), body: render_csv(&out.rows) });
    Ok(out)
}
