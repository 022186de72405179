//! Command-line front end: argument and config resolution, subcommand
//! dispatch, CSV artifacts and run manifests.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

use config::FileConfig;
use output::{Outputs, RunManifest};

/// Worker thread count for replica and sweep parallelism.
pub const THREADS_ENV: &str = "JUMPSYNC_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] jumpsync::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for numerical failures of a valid run, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jumpsync", version, about = "Jump and synchronization particle systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical speed and the speed curve v(zeta).
    Speed(commands::SpeedArgs),
    /// Steady-state speed of the n-particle system.
    Simulate(commands::SimulateArgs),
    /// Branching random walk population and leading particle.
    Brw(commands::BrwArgs),
    /// Mean-field integration of the distribution function.
    Mfl(commands::MflArgs),
    /// Traveling waves by phase-plane shooting.
    Tws(commands::TwsArgs),
    /// Best split of a rate budget between jumps and synchronization.
    Optimize(commands::OptimizeArgs),
    /// Simulated speeds next to the published table rows.
    ReproduceTable(commands::TableArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Speed(_) => "speed",
            Command::Simulate(_) => "simulate",
            Command::Brw(_) => "brw",
            Command::Mfl(_) => "mfl",
            Command::Tws(_) => "tws",
            Command::Optimize(_) => "optimize",
            Command::ReproduceTable(_) => "reproduce-table",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Speed(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Brw(a) => &a.common,
            Command::Mfl(a) => &a.common,
            Command::Tws(a) => &a.common,
            Command::Optimize(a) => &a.common,
            Command::ReproduceTable(a) => &a.common,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML file of flat key-value settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Jump law: exp, uniform02, det1, or empirical:<csv of x,F>.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Directory for CSV artifacts and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest file; defaults to manifest.jsonl in the output directory.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    configure_threads();
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return;
    };
    match text.parse::<usize>() {
        Ok(threads) if threads > 0 => {
            // a pool may already exist when called in-process more than once
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
        _ => eprintln!("warning: ignoring {THREADS_ENV}={text}"),
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let start = Instant::now();
    let common = command.common();
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let dir = common
        .out
        .clone()
        .or_else(|| file.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let manifest_path = common.manifest.clone().unwrap_or_else(|| dir.join("manifest.jsonl"));
    let mut outputs = Outputs::new(&dir)?;
    let mut ctx = commands::Ctx::new(common.clone(), file);

    let result = match command {
        Command::Speed(a) => commands::speed(&mut ctx, a, &mut outputs),
        Command::Simulate(a) => commands::simulate(&mut ctx, a, &mut outputs),
        Command::Brw(a) => commands::brw(&mut ctx, a, &mut outputs),
        Command::Mfl(a) => commands::mfl(&mut ctx, a, &mut outputs),
        Command::Tws(a) => commands::tws(&mut ctx, a, &mut outputs),
        Command::Optimize(a) => commands::optimize(&mut ctx, a, &mut outputs),
        Command::ReproduceTable(a) => commands::reproduce_table(&mut ctx, a, &mut outputs),
    };

    let manifest = RunManifest {
        subcommand: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: ctx.echo(),
        status: if result.is_ok() { "ok" } else { "error" }.to_string(),
        exit_code: result.as_ref().map_or_else(CliError::exit_code, |_| 0),
        error: result.as_ref().err().map(ToString::to_string),
        wall_time: start.elapsed().as_secs_f64(),
        outputs: outputs.records,
    };
    manifest.append(&manifest_path)?;
    result
}
