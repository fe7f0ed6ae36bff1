//! Command-line experiment runner for volume potentials and moving-plane tests.

pub mod commands;
pub mod config;

use clap::{Parser, Subcommand};
use config::Settings;
use std::ffi::OsString;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<rieszlab_core::Error> for CliError {
    fn from(e: rieszlab_core::Error) -> Self {
        use rieszlab_core::quadrature::QuadratureError;
        use rieszlab_core::Error as E;
        match e {
            E::Kernel(_) | E::Geometry(_) | E::Dimension(_) | E::Precondition(_) => CliError::Config(e.to_string()),
            E::Quadrature(QuadratureError::Config(_) | QuadratureError::Dimension(_)) => {
                CliError::Config(e.to_string())
            }
            E::Format(_) | E::Io(_) | E::Csv(_) | E::Json(_) => CliError::Config(e.to_string()),
            E::Quadrature(_) | E::NoEvent { .. } => CliError::Internal(e.to_string()),
        }
    }
}

impl From<rieszlab_core::kernels::KernelError> for CliError {
    fn from(e: rieszlab_core::kernels::KernelError) -> Self {
        rieszlab_core::Error::from(e).into()
    }
}

impl From<rieszlab_core::geometry::GeometryError> for CliError {
    fn from(e: rieszlab_core::geometry::GeometryError) -> Self {
        rieszlab_core::Error::from(e).into()
    }
}

#[derive(Debug, Parser)]
#[command(name = "rieszlab", version, about = "Volume potentials and moving-plane ball tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommandArgs {
    /// JSON file with default settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel values and derivatives on a grid of separations (CSV).
    KernelScan(CommandArgs),
    /// Potential at one point, printed as `value ± error`.
    Potential(CommandArgs),
    /// Potential on seeded boundary samples (CSV with statistics).
    BoundaryProfile(CommandArgs),
    /// Critical-position residuals along one direction (CSV).
    MovingPlane(CommandArgs),
    /// Sign and difference-identity checks on seeded cap points (JSON).
    VerifyLemmas(CommandArgs),
    /// Full characterization verdict (JSON).
    BallTest(CommandArgs),
    /// Difference quotients approaching the critical orthogonality point (JSON).
    QuotientProbe(CommandArgs),
}

impl Command {
    fn args(&self) -> &CommandArgs {
        match self {
            Command::KernelScan(a)
            | Command::Potential(a)
            | Command::BoundaryProfile(a)
            | Command::MovingPlane(a)
            | Command::VerifyLemmas(a)
            | Command::BallTest(a)
            | Command::QuotientProbe(a) => a,
        }
    }
}

/// Sizes the global thread pool from `RIESZLAB_THREADS` (0 or unset = automatic).
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("RIESZLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("RIESZLAB_THREADS must be a non-negative integer, got `{v}`")))?;
    if n > 0 {
        // A second call in the same process finds the pool already built.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rieszlab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    init_threads()?;
    let args = command.args();
    let s = Settings::resolve(args.settings.clone(), args.config.as_deref())?;
    match command {
        Command::KernelScan(_) => commands::kernel_scan(&s),
        Command::Potential(_) => commands::potential(&s),
        Command::BoundaryProfile(_) => commands::boundary_profile(&s),
        Command::MovingPlane(_) => commands::moving_plane(&s),
        Command::VerifyLemmas(_) => commands::verify_lemmas(&s),
        Command::BallTest(_) => commands::ball_test(&s),
        Command::QuotientProbe(_) => commands::quotient_probe(&s),
    }
}
