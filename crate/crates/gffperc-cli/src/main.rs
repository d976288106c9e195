//! `gffperc`: runs one pipeline from a TOML config and writes CSV outputs
//! with a hashed JSON manifest.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical or I/O failure,
//! 4 invariant failure.

mod commands;
mod config;
mod manifest;
mod verify;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use commands::Ctx;
use manifest::{Outputs, RunManifest};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError { code: 3, message: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError { code: 3, message: msg.into() }
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        CliError { code: 4, message: msg.into() }
    }
}

impl From<gffperc::Error> for CliError {
    fn from(e: gffperc::Error) -> Self {
        CliError { code: e.exit_code() as u8, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "gffperc", version, about = "Level-set percolation of the lattice Gaussian free field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults apply to missing fields.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Field overrides such as `--samples=500` or `--schedule.rho=2.5`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the free Green function and write the binary cache.
    Green(Common),
    /// Box capacities, their scaling fit and an equilibrium measure.
    Capacity(Common),
    /// Exact field samples on the domain.
    Sample(Common),
    /// Percolation density curves across domain sizes.
    Theta(Common),
    /// Capacity-bracket decay curves with Wilson intervals.
    Decay(Common),
    /// Complex-height series of the configured observables.
    Extend(Common),
    /// Coarse-graining contract on sampled configurations.
    Coarse(Common),
    /// The invariant suite; uses the bundled small config by default.
    Verify(Common),
}

type Runner = fn(&mut Ctx) -> Result<serde_json::Value, CliError>;

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let (name, common, runner): (&str, Common, Runner) = match cli.command {
        Command::Green(c) => ("green", c, commands::green),
        Command::Capacity(c) => ("capacity", c, commands::capacity),
        Command::Sample(c) => ("sample", c, commands::sample),
        Command::Theta(c) => ("theta", c, commands::theta),
        Command::Decay(c) => ("decay", c, commands::decay),
        Command::Extend(c) => ("extend", c, commands::extend),
        Command::Coarse(c) => ("coarse", c, commands::coarse),
        Command::Verify(c) => ("verify", c, verify::verify),
    };
    let cfg = match (&common.config, name) {
        (None, "verify") => config::load(Some(verify::BUNDLED), &common.overrides)?,
        (path, _) => config::load_path(path.as_deref(), &common.overrides)?,
    };
    let workers = cfg.workers;
    if workers > 1 || workers == 0 {
        gffperc::par::set_workers(workers);
    }
    let start = Instant::now();
    let out = Outputs::create(&cfg.output)?;
    let mut ctx = Ctx { cfg: &cfg, exec: gffperc::par::execution_for(workers), out, greens: Vec::new(), h_star: None };
    let results = runner(&mut ctx)?;
    let Ctx { out, greens, h_star, .. } = ctx;
    log::info!("{name}: wrote {} files to {}", out.entries().len(), out.dir().display());
    out.commit(RunManifest {
        command: name.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        workers,
        green_cache: greens,
        h_star,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: Vec::new(),
        results,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
