//! `qstokes`: build two-mode states, simulate the Stokes measurement plan,
//! reconstruct the moments and print wave-plate settings.
//!
//! Exit status: 0 clean, 1 error, 2 completed with warnings.

mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use qstokes::Realization;

use config::{RunConfig, RunMode};

#[derive(Parser)]
#[command(name = "qstokes", version, about = "Quantum Stokes parameter measurement pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Run configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// State spec JSON; replaces the config's state.
    #[arg(long)]
    state: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    mode: Option<RunMode>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a θ family, e.g. `phi0=0.2,0.5,0.8,1.1,1.4` or `phi_half=0.4,0.8,1.2` (radians). Repeatable.
    #[arg(long = "theta-set", value_name = "FAMILY=THETAS")]
    theta_set: Vec<String>,
    /// Add θ = π/4 and 3π/4 to both families (17 settings).
    #[arg(long)]
    verify_identities: bool,
    /// Rotation used for every setting.
    #[arg(long, value_parser = parse_realization)]
    realization: Option<Realization>,
}

fn parse_realization(s: &str) -> Result<Realization, String> {
    match s {
        "abstract_su2" | "abstract" => Ok(Realization::AbstractSu2),
        "qqh_gadget" | "gadget" => Ok(Realization::QqhGadget),
        _ => Err(format!(
            "unknown realization {s:?} (expected abstract_su2 or qqh_gadget)"
        )),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print norm, boundary mass, Stokes means and (co)variances of a state.
    State {
        #[command(flatten)]
        inputs: Inputs,
        /// Write the state summary JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cross-check the moment path against dense Stokes operators.
        #[arg(long)]
        oracle_check: bool,
    },
    /// Simulate the measurement plan and write the records.
    Measure {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        run: RunArgs,
        /// Records file (`.json`, or `.csv` for the flat export).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct moments and Stokes statistics from a records file.
    Reconstruct {
        /// Records file written by `measure` (JSON or CSV).
        records: PathBuf,
        #[command(flatten)]
        inputs: Inputs,
        /// Report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate the θ = π/4, 3π/4 add/subtract identities.
        #[arg(long)]
        verify_identities: bool,
        /// Compare against the state's oracle and warn above tolerance.
        #[arg(long)]
        oracle_check: bool,
        #[arg(long)]
        bootstrap_resamples: Option<usize>,
        #[arg(long)]
        bootstrap_seed: Option<u64>,
    },
    /// Print the Q-Q-H plate angles realizing u(theta, phi).
    Gadget {
        #[arg(allow_negative_numbers = true)]
        theta: f64,
        #[arg(allow_negative_numbers = true)]
        phi: f64,
    },
    /// Run state -> measure -> reconstruct and check against the oracle.
    Verify {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn load(inputs: &Inputs) -> Result<RunConfig> {
    let mut cfg = match &inputs.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &inputs.state {
        cfg.state = Some(config::load_state_spec(path)?);
    }
    Ok(cfg)
}

fn apply_run(cfg: &mut RunConfig, run: &RunArgs) -> Result<()> {
    if let Some(m) = run.mode {
        cfg.mode = m;
    }
    if let Some(s) = run.shots {
        cfg.shots = s;
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(r) = run.realization {
        cfg.realization = r;
    }
    for arg in &run.theta_set {
        config::apply_theta_set(&mut cfg.plan, arg)?;
    }
    cfg.plan.verify_identities |= run.verify_identities;
    Ok(())
}

/// Returns the number of failed checks (only `verify` reports any).
fn run(cli: Cli) -> Result<usize> {
    match cli.command {
        Command::State {
            inputs,
            out,
            oracle_check,
        } => {
            let mut cfg = load(&inputs)?;
            if out.is_some() {
                cfg.outputs.state = out;
            }
            commands::cmd_state(&cfg, oracle_check)?;
        }
        Command::Measure { inputs, run, out } => {
            let mut cfg = load(&inputs)?;
            apply_run(&mut cfg, &run)?;
            if out.is_some() {
                cfg.outputs.records = out;
            }
            commands::cmd_measure(&cfg)?;
        }
        Command::Reconstruct {
            records,
            inputs,
            out,
            verify_identities,
            oracle_check,
            bootstrap_resamples,
            bootstrap_seed,
        } => {
            let mut cfg = load(&inputs)?;
            if out.is_some() {
                cfg.outputs.report = out;
            }
            if let Some(n) = bootstrap_resamples {
                cfg.bootstrap.resamples = n;
            }
            if let Some(s) = bootstrap_seed {
                cfg.bootstrap.seed = s;
            }
            commands::cmd_reconstruct(&cfg, &records, verify_identities, oracle_check)?;
        }
        Command::Gadget { theta, phi } => commands::cmd_gadget(theta, phi)?,
        Command::Verify { inputs, run } => {
            let mut cfg = load(&inputs)?;
            apply_run(&mut cfg, &run)?;
            return commands::cmd_verify(&cfg);
        }
    }
    Ok(0)
}

static WARNINGS: AtomicUsize = AtomicUsize::new(0);

/// Forwards to env_logger and counts warnings for the exit status.
struct CountingLogger(env_logger::Logger);

impl log::Log for CountingLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn || self.0.enabled(metadata)
    }

    fn log(&self, record: &log::Record) {
        if record.level() <= log::Level::Warn {
            WARNINGS.fetch_add(1, Ordering::Relaxed);
        }
        if self.0.matches(record) {
            self.0.log(record);
        }
    }

    fn flush(&self) {
        self.0.flush();
    }
}

fn init_logging() {
    let logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .format_target(false)
        .build();
    let max = logger.filter().max(log::LevelFilter::Warn);
    log::set_boxed_logger(Box::new(CountingLogger(logger))).expect("logger installed once");
    log::set_max_level(max);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging();
    match run(cli) {
        Ok(0) if WARNINGS.load(Ordering::Relaxed) == 0 => ExitCode::SUCCESS,
        Ok(0) => ExitCode::from(2),
        Ok(failed) => {
            eprintln!("error: {failed} verification checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
