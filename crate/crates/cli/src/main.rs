//! `locgibbs`: runs each stage of the Gibbs-sampling pipeline from a TOML
//! config and writes CSV tables plus a JSON manifest.
//!
//! Exit codes: 0 ok, 1 other failure, 2 config error, 3 resource cap,
//! 4 verification failure.

mod commands;
mod config;
mod output;
mod report;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use locgibbs::dissipator::BoltzmannWeight;
use serde_json::{json, Value};

use config::ExperimentConfig;
use output::OutputDir;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Cap(String),
    Verify(String),
    Io(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Verify(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Cap(m) => write!(f, "resource cap exceeded: {m}"),
            CliError::Verify(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<locgibbs::Error> for CliError {
    fn from(e: locgibbs::Error) -> Self {
        use locgibbs::Error as E;
        let msg = e.to_string();
        if e.is_resource_cap() {
            return CliError::Cap(msg);
        }
        match e {
            E::InvalidParameter(_) | E::InvalidLattice(_) | E::UnknownModel(_) | E::ModelDimension { .. } | E::SiteOutOfRange { .. } | E::EmptyRegion => {
                CliError::Config(msg)
            }
            _ => CliError::Other(msg),
        }
    }
}

#[derive(Parser)]
#[command(name = "locgibbs", version, about = "Local detailed-balance Lindbladian experiments")]
struct Cli {
    /// Experiment config (TOML, or a manifest.json from an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: the config's `out`, else `out/<command>`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hamiltonian terms and exact thermal reference values.
    Model,
    /// Local generators, detailed-balance residuals and the steady state.
    Lindblad,
    /// Time series of energy, correlators and heat capacity.
    Evolve,
    /// Dilation-gadget channel error against the exact local channel.
    Gadget,
    /// Compiles the site-0 gadgets onto the ladder template.
    Compile,
    /// Cartesian product of evolve runs over up to two axes.
    Sweep,
    /// Built-in numerical self-checks.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: verify::Level,
        /// Drops the Boltzmann factor from every jump (negative control).
        #[arg(long, hide = true)]
        corrupt_weight: bool,
    },
    /// Summarizes the artifacts in the output directory.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Model => "model",
            Command::Lindblad => "lindblad",
            Command::Evolve => "evolve",
            Command::Gadget => "gadget",
            Command::Compile => "compile",
            Command::Sweep => "sweep",
            Command::Verify { .. } => "verify",
            Command::Report => "report",
        }
    }
}

/// Loads the config with CLI overrides applied; returns it without its
/// `out` field (so the config hash does not depend on where outputs go)
/// together with the resolved output directory.
fn load_config(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dir = cli.out.clone().or(cfg.out.take()).unwrap_or_else(|| PathBuf::from("out").join(cli.command.name()));
    Ok((cfg, dir))
}

fn final_row(table: &output::Table) -> Value {
    let Some(row) = table.rows.last() else {
        return Value::Null;
    };
    Value::Object(table.columns.iter().zip(row).map(|(c, v)| (c.clone(), json!(output::format_value(*v)))).collect())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let command = cli.command.name();
    match &cli.command {
        Command::Verify { level, corrupt_weight } => {
            let weight = if *corrupt_weight { BoltzmannWeight::Omitted } else { BoltzmannWeight::Included };
            let checks = verify::run(*level, weight)?;
            for c in &checks {
                println!("{} {} = {:.3e} (allowed [{:e}, {:e}], {:.2} s)", if c.passed() { "PASS" } else { "FAIL" }, c.name, c.value, c.lo, c.hi, c.seconds);
            }
            if let Some(dir) = &cli.out {
                let mut out = OutputDir::create_raw(dir, 0, "none")?;
                out.write_records("verify.csv", "verify", &verify::COLUMNS.map(String::from), verify::records(&checks))?;
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
            if !failed.is_empty() {
                return Err(CliError::Verify(failed.join(", ")));
            }
            Ok(())
        }
        Command::Report => {
            let dir = cli.out.clone().ok_or_else(|| CliError::Config("report needs --out pointing at a run directory".into()))?;
            let summary = report::report(&dir)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?);
            Ok(())
        }
        cmd => {
            let (cfg, dir) = load_config(cli)?;
            let mut out = OutputDir::create(&dir, &cfg)?;
            let summary = match cmd {
                Command::Model => commands::model(&cfg, &mut out)?,
                Command::Lindblad => commands::lindblad(&cfg, &mut out)?,
                Command::Gadget => commands::gadget(&cfg, &mut out)?,
                Command::Compile => commands::compile(&cfg, &mut out)?,
                Command::Evolve => {
                    let table = run::evolve(&cfg)?;
                    out.write_table("timeseries.csv", "timeseries", &table)?;
                    json!({ "final": final_row(&table) })
                }
                Command::Sweep => {
                    let table = run::sweep(&cfg)?;
                    out.write_table("sweep.csv", "sweep", &table)?;
                    json!({ "rows": table.rows.len() })
                }
                Command::Verify { .. } | Command::Report => unreachable!(),
            };
            out.finish(command, &cfg, summary)?;
            println!("{}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(1);
        }
    }
    if let Err(e) = locgibbs::linalg::backend_self_test() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
