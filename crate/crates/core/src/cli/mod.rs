//! Scenario configuration, orchestration and artifact output for the `ergorate` binary.
//!
//! Every subcommand computes all of its artifacts in memory first; files are written only when
//! the whole run succeeded, each through a temporary file and a rename.

pub mod config;
mod pipeline;
mod table;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{Config, Range};
pub use pipeline::{
    build_generator, build_potential, kinetic_scenario, rates_scenario, simulate_scenario, spectral_scenario,
    verify_scenario, KineticOutcome, RatesOutcome, SimulateOutcome, SpectralOutcome, VerifyOutcome,
};
pub use table::{render_csv, render_text, Row};

use crate::rates::XiConvention;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for schema violations, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub(crate) fn num(e: impl std::fmt::Display) -> Self {
        CliError::Numerical(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Rates,
    Spectral,
    Simulate,
    Kinetic,
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Rates => "rates",
            Command::Spectral => "spectral",
            Command::Simulate => "simulate",
            Command::Kinetic => "kinetic",
            Command::Report => "report",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads; the global pool when `None`.
    pub threads: Option<usize>,
    pub xi_convention: XiConvention,
    /// Emit the `# created` line. Off makes outputs fully byte-stable.
    pub timestamp: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: PathBuf::from("out"),
            seed: 1,
            threads: None,
            xi_convention: XiConvention::T,
            timestamp: true,
        }
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

/// Artifacts plus the comparison rows and free-form lines for the console summary.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub rows: Vec<Row>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn absorb(&mut self, other: Outcome) {
        self.artifacts.extend(other.artifacts);
        self.rows.extend(other.rows);
        self.summary.extend(other.summary);
    }
}

/// Built-in scenarios.
pub const CATALOG: &[&str] = &["ou", "subexp-p05", "heavytail-p2", "kinetic-quadratic", "kinetic-subexp"];

pub fn catalog_config(name: &str) -> Result<Config, CliError> {
    let text = match name {
        "ou" => CATALOG_OU,
        "subexp-p05" => CATALOG_SUBEXP,
        "heavytail-p2" => CATALOG_HEAVY,
        "kinetic-quadratic" => CATALOG_KIN_QUAD,
        "kinetic-subexp" => CATALOG_KIN_SUBEXP,
        other => {
            return Err(CliError::Config(format!(
                "unknown catalog scenario `{other}`; known: {}",
                CATALOG.join(", ")
            )))
        }
    };
    Config::parse(text)
}

const CATALOG_OU: &str = "\
name = ou
potential = quadratic:1
grid.half_width = 8
grid.n = 1601
measure.half_width = 10
measure.n = 4001
[lyapunov]
candidate = expr:1 + x1^2
phi = linear:1
b = 2
set = ball:1.4142135623730951
half_width = 6
n = 401
[poincare]
u = -3,3
[simulate]
path_horizon = 2000
";

const CATALOG_SUBEXP: &str = "\
name = subexp-p05
potential = power:0.5,0.01
grid.half_width = 40
grid.n = 4001
measure.half_width = 2000
measure.n = 100001
[lyapunov]
candidate = exp-potential:0.5
# a^3/2 u / log(u)^2 with a = 1/2
phi = expr:0.0625*u/log(u)^2
half_width = 30
n = 601
[poincare]
divergence = yes
[rates]
s = 1e-8..1e-3..41
t = 0..2000..101
evolve.start = 3,0.5
evolve.horizon = 20
simulate.start = 4,0.3
";

const CATALOG_HEAVY: &str = "\
name = heavytail-p2
potential = heavytail:2
grid.half_width = 40
grid.n = 4001
measure.half_width = 100000
measure.n = 1000001
[lyapunov]
candidate = power-radial:0.15
# V = (1+|x|)^e, phi(u) = u^(1-2/e), e = 0.15
phi = expr:u^(1-2/0.15)
half_width = 300
n = 601
[poincare]
divergence = yes
[rates]
s = 1e-6..1e-2..41
t = 0..1000..101
r_floor = 1e-8
evolve.start = 3,0.5
simulate.start = 4,0.3
simulate.bins = 96
";

const CATALOG_KIN_QUAD: &str = "\
name = kinetic-quadratic
potential = quadratic:1
generator = kinetic
measure.half_width = 10
measure.n = 2001
[lyapunov]
candidate = kinetic-exp
phi = linear:1
[kinetic]
c = 1
kappa = 1
half_width = 6
n = 121
pde_n = 81
pde_half_width = 6
evolve.horizon = 15
evolve.points = 61
evolve.dt = 0.05
[simulate]
start = 1.5,0.5
particles = 4000
";

const CATALOG_KIN_SUBEXP: &str = "\
name = kinetic-subexp
potential = power:0.5,0.01
generator = kinetic
measure.half_width = 200
measure.n = 20001
[kinetic]
# <grad G, grad F> -> 0 at infinity when p < 1
c = 0
kappa = 1
pde_n = 81
pde_half_width = 8
evolve.horizon = 12
evolve.points = 49
evolve.dt = 0.05
[simulate]
start = 1.5,0.5
";

fn metadata(cfg: &Config, opts: &RunOptions, command: &str) -> String {
    let mut m = String::new();
    if opts.timestamp {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        m.push_str(&format!("# created = {now}\n"));
    }
    m.push_str(&format!("# command = {command}\n"));
    m.push_str(&format!("# scenario = {}\n", cfg.raw("name").unwrap_or("custom")));
    m.push_str(&format!("# seed = {}\n", opts.seed));
    m.push_str(&format!("# xi_convention = {}\n", opts.xi_convention));
    m.push_str(&format!("# rng = {}\n", crate::montecarlo::RNG_NAME));
    m
}

fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Computes a subcommand's artifacts without touching the filesystem.
pub fn compute(command: Command, cfg: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut out = in_pool(opts.threads, || -> Result<Outcome, CliError> {
        match command {
            Command::Verify => pipeline::verify(cfg),
            Command::Rates => pipeline::rates(cfg, opts),
            Command::Spectral => pipeline::spectral(cfg),
            Command::Simulate => pipeline::simulate(cfg, opts),
            Command::Kinetic => pipeline::kinetic(cfg, opts),
            Command::Report => pipeline::report(cfg, opts),
        }
    })??;
    let head = metadata(cfg, opts, command.name());
    for a in &mut out.artifacts {
        a.body = format!("{head}{}", a.body);
    }
    out.artifacts.push(Artifact {
        name: "config.resolved".into(),
        body: format!("{head}{}", cfg.resolved()),
    });
    Ok(out)
}

/// Runs a subcommand and writes its artifacts under `opts.out`.
pub fn run(command: Command, cfg: &Config, opts: &RunOptions) -> Result<Outcome, CliError> {
    let out = compute(command, cfg, opts)?;
    write_all(&opts.out, &out.artifacts)?;
    Ok(out)
}

/// Runs named catalog scenarios concurrently, each into `out/<name>/`.
pub fn run_catalog(names: &[String], opts: &RunOptions) -> Result<Vec<(String, Outcome)>, CliError> {
    let configs: Vec<(String, Config)> = names
        .iter()
        .map(|n| catalog_config(n).map(|c| (n.clone(), c)))
        .collect::<Result<_, _>>()?;
    let results: Vec<Result<(String, Outcome), CliError>> = in_pool(opts.threads, || {
        configs
            .par_iter()
            .map(|(name, cfg)| {
                let sub = RunOptions {
                    out: opts.out.join(name),
                    threads: None,
                    ..opts.clone()
                };
                compute(Command::Report, cfg, &sub).map(|o| (name.clone(), o))
            })
            .collect()
    })?;
    let results: Vec<(String, Outcome)> = results.into_iter().collect::<Result<_, _>>()?;
    for (name, o) in &results {
        write_all(&opts.out.join(name), &o.artifacts)?;
    }
    Ok(results)
}

fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let pid = std::process::id();
    let mut staged = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let tmp = dir.join(format!(".{}.tmp{pid}", a.name));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(a.body.as_bytes())?;
        f.sync_all()?;
        staged.push((tmp, dir.join(&a.name)));
    }
    for (tmp, dst) in staged {
        fs::rename(tmp, dst)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_presets_parse() {
        for n in CATALOG {
            let c = catalog_config(n).unwrap();
            assert!(c.require("potential").is_ok());
        }
        assert_eq!(catalog_config("nope").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn rates_linear_phi_and_atomic_write() {
        let mut cfg = Config::default();
        cfg.set("lyapunov.phi", "linear:1").unwrap();
        cfg.set("rates.t", "0..10..11").unwrap();
        let dir = std::env::temp_dir().join(format!("ergorate-cli-{}", std::process::id()));
        let opts = RunOptions {
            out: dir.clone(),
            timestamp: false,
            ..RunOptions::default()
        };
        let out = run(Command::Rates, &cfg, &opts).unwrap();
        let psi = std::fs::read_to_string(dir.join("psi.csv")).unwrap();
        let row = psi.lines().find(|l| l.starts_with("1.0000000000000000e0,")).unwrap();
        let v: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-6, "{row}");
        assert!(out.artifacts.iter().any(|a| a.name == "config.resolved"));
        assert!(std::fs::read_dir(&dir).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().contains(".tmp")));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn missing_potential_is_a_schema_error() {
        let cfg = Config::parse("name = x").unwrap();
        let e = compute(Command::Spectral, &cfg, &RunOptions::default()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("`potential`"));
    }
}
