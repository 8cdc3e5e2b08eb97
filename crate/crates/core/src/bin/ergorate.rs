use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ergorate::cli::{self, catalog_config, render_text, CliError, Command, Config, RunOptions, CATALOG};
use ergorate::rates::XiConvention;

#[derive(Parser)]
#[command(name = "ergorate", version, about = "Drift certificates, Poincaré constants and decay rates for diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (key = value, optional [section] headers)
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Start from a built-in scenario instead of an empty config
    #[arg(long)]
    scenario: Option<String>,
    /// Override a key, e.g. --set grid.n=801 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Time convention for xi: t or 2t (overrides rates.xi_convention)
    #[arg(long, value_parser = ["t", "2t"])]
    xi_convention: Option<String>,
    /// Omit the `# created` line so repeated runs are byte-identical
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check or fit a drift certificate on a grid
    Verify(Common),
    /// Tabulate psi, beta_W, xi and the rate constants
    Rates {
        #[command(flatten)]
        common: Common,
        /// Shorthand for --set lyapunov.phi=...
        #[arg(long)]
        phi: Option<String>,
        /// Shorthand for --set rates.t=lo..hi..points
        #[arg(long)]
        t: Option<String>,
    },
    /// Spectral gap, Muckenhoupt bracket and a semigroup oracle trace
    Spectral(Common),
    /// Monte Carlo autocovariance and ensemble density traces
    Simulate(Common),
    /// Kinetic parameter search, certificate and phase-space oracle
    Kinetic(Common),
    /// Everything that applies to the scenario, with a comparison table
    Report(Common),
    /// Run built-in scenarios (all when none are named)
    Catalog {
        names: Vec<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, value_parser = ["t", "2t"])]
        xi_convention: Option<String>,
        #[arg(long)]
        no_timestamp: bool,
    },
}

fn convention(flag: Option<&str>, cfg: Option<&Config>) -> XiConvention {
    let v = flag.or_else(|| cfg.and_then(|c| c.raw("rates.xi_convention"))).unwrap_or("t");
    v.parse().unwrap_or_default()
}

fn load(common: &Common, extra: &[(&str, Option<&String>)]) -> Result<(Config, RunOptions), CliError> {
    let mut cfg = match &common.scenario {
        Some(name) => catalog_config(name)?,
        None => Config::default(),
    };
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        let file = Config::parse(&text)?;
        cfg.merge(&file)?;
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    for (k, v) in extra {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    let opts = RunOptions {
        out: common.out.clone(),
        seed: common.seed,
        threads: common.threads,
        xi_convention: convention(common.xi_convention.as_deref(), Some(&cfg)),
        timestamp: !common.no_timestamp,
    };
    Ok((cfg, opts))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, common, extra) = match &cli.command {
        Cmd::Verify(c) => (Command::Verify, c, vec![]),
        Cmd::Rates { common, phi, t } => (Command::Rates, common, vec![("lyapunov.phi", phi.as_ref()), ("rates.t", t.as_ref())]),
        Cmd::Spectral(c) => (Command::Spectral, c, vec![]),
        Cmd::Simulate(c) => (Command::Simulate, c, vec![]),
        Cmd::Kinetic(c) => (Command::Kinetic, c, vec![]),
        Cmd::Report(c) => (Command::Report, c, vec![]),
        Cmd::Catalog {
            names,
            list,
            out,
            seed,
            threads,
            xi_convention,
            no_timestamp,
        } => {
            if *list {
                CATALOG.iter().for_each(|n| println!("{n}"));
                return Ok(());
            }
            let names: Vec<String> =
                if names.is_empty() { CATALOG.iter().map(|s| s.to_string()).collect() } else { names.clone() };
            let opts = RunOptions {
                out: out.clone(),
                seed: *seed,
                threads: *threads,
                xi_convention: convention(xi_convention.as_deref(), None),
                timestamp: !no_timestamp,
            };
            for (name, o) in cli::run_catalog(&names, &opts)? {
                println!("== {name} -> {}", opts.out.join(&name).display());
                print!("{}", render_text(&o.rows));
            }
            return Ok(());
        }
    };
    let (cfg, opts) = load(common, &extra)?;
    let out = cli::run(command, &cfg, &opts)?;
    if !out.rows.is_empty() {
        print!("{}", render_text(&out.rows));
    }
    for line in &out.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", out.artifacts.len(), opts.out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ergorate: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
