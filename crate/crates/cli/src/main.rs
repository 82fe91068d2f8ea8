//! `sfde-lab`: scenario runner for the sfde-core solver, diagnostics, probers and lemma checks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes; see docs/cli.md.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ASSERTION_FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const RUNTIME: u8 = 4;
    pub const EXPLOSION: u8 = 10;
    pub const PROBE_VIOLATION: u8 = 11;
    pub const STAGES_EXHAUSTED: u8 = 12;
    pub const DIVERGED: u8 = 20;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] sfde_core::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io(_) | CliError::Core(sfde_core::Error::Io(_)) => exit::IO,
            CliError::Core(e) if e.is_divergence() => exit::DIVERGED,
            CliError::Core(_) => exit::RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sfde-lab", version, about = "Stochastic functional differential equations: solver and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Scenario TOML, or a report.json whose embedded config is re-run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, env = "SFDE_LAB_OUTDIR", default_value = "sfde-out")]
    pub outdir: PathBuf,
    /// Exit 1 when the command's assertions fail.
    #[arg(long = "assert")]
    pub assert: bool,
    /// Overrides `[run] replicas` (or the lemma test's replica count).
    #[arg(long)]
    pub replicas: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LemmaName {
    Gronwall5,
    Gbm,
    Lemma4,
    Lemma6,
    Dereich,
}

impl LemmaName {
    pub fn as_str(self) -> &'static str {
        match self {
            LemmaName::Gronwall5 => "gronwall5",
            LemmaName::Gbm => "gbm",
            LemmaName::Lemma4 => "lemma4",
            LemmaName::Lemma6 => "lemma6",
            LemmaName::Dereich => "dereich",
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct LemmaArgs {
    pub name: LemmaName,
    /// Homogeneity scale ξ.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Moment order p.
    #[arg(long)]
    pub p: Option<f64>,
    /// Integrand bound v (dereich) or martingale scale (gronwall5, lemma6).
    #[arg(long)]
    pub v: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximal solution by localized stages.
    Solve(Common),
    /// Resolution-ladder convergence diagnostics on shared noise.
    Converge(Common),
    /// Monotonicity (K) and coercivity probers.
    Probe(Common),
    /// Monte Carlo lemma checks.
    Lemma {
        #[command(flatten)]
        lemma: LemmaArgs,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Solve(c) | Command::Converge(c) | Command::Probe(c) => c,
        Command::Lemma { common, .. } => common,
    };
    if let Some(jobs) = common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("sfde-lab: {e}");
            return ExitCode::from(exit::RUNTIME);
        }
    }
    let result = match &cli.command {
        Command::Solve(c) => commands::solve(c),
        Command::Converge(c) => commands::converge(c),
        Command::Probe(c) => commands::probe(c),
        Command::Lemma { lemma, common } => commands::lemma(lemma, common),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("sfde-lab: {e}");
            ExitCode::from(e.code())
        }
    }
}
