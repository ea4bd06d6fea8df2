//! Command-line experiment driver: every verb reads the run configuration,
//! writes into one run directory under an advisory lock and leaves a
//! manifest beside its outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;
pub mod report;
pub mod rundir;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::BaselineKind;
pub use config::RunConfig;
pub use error::{CliError, CliResult};

use commands::Progress;
use rundir::CommandRun;

#[derive(Debug, Parser)]
#[command(
    name = "semcode",
    version,
    about = "Hierarchical RL semantic video coding experiments"
)]
pub struct Cli {
    /// Run configuration (TOML); built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured run directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw the synthetic video model.
    GenEnv,
    /// Train parent and child agents for every λ.
    Train,
    /// Greedy HRL decisions and their RD points.
    Eval,
    /// RD points of a baseline.
    Baseline {
        #[arg(value_enum)]
        which: BaselineKind,
    },
    /// Exhaustive search per λ and gaps of any trained policies.
    Oracle,
    /// BD-rate and BD-quality of every test curve against an anchor curve.
    Bd {
        #[arg(long)]
        anchor: PathBuf,
        #[arg(long, required = true)]
        test: Vec<PathBuf>,
        /// Curve of the anchor file to use; its first curve by default.
        #[arg(long)]
        anchor_label: Option<String>,
    },
    /// SVG of RD curves; all rd_*.csv of the run directory by default.
    Plot { csvs: Vec<PathBuf> },
    /// Markdown summary of the run directory.
    Report,
    /// Print the default configuration.
    DefaultConfig,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::GenEnv => "gen-env".into(),
            Command::Train => "train".into(),
            Command::Eval => "eval".into(),
            Command::Baseline { which } => format!("baseline-{}", which.name()),
            Command::Oracle => "oracle".into(),
            Command::Bd { .. } => "bd".into(),
            Command::Plot { .. } => "plot".into(),
            Command::Report => "report".into(),
            Command::DefaultConfig => "default-config".into(),
        }
    }
}

/// Effective configuration: the file (or defaults) with flag overrides applied.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Runs one parsed invocation; `argv` is recorded in the manifest.
pub fn run(cli: &Cli, argv: Vec<String>) -> CliResult<()> {
    let config = resolve_config(cli)?;
    if let Command::DefaultConfig = cli.command {
        print!("{}", RunConfig::default().to_toml());
        return Ok(());
    }
    let progress = Progress { quiet: cli.quiet };
    let mut run = CommandRun::start(&config.out_dir, &config, &cli.command.name(), argv)?;
    match &cli.command {
        Command::GenEnv => commands::gen_env(&mut run)?,
        Command::Train => commands::train(&mut run, progress)?,
        Command::Eval => commands::eval(&mut run, progress)?,
        Command::Baseline { which } => commands::baseline(&mut run, *which, progress)?,
        Command::Oracle => commands::oracle(&mut run, progress)?,
        Command::Bd {
            anchor,
            test,
            anchor_label,
        } => commands::bd(&mut run, anchor, test, anchor_label.as_deref())?,
        Command::Plot { csvs } => commands::plot(&mut run, csvs)?,
        Command::Report => commands::report(&mut run)?,
        Command::DefaultConfig => unreachable!("handled above"),
    }
    let manifest = run.finish()?;
    progress.say(format!(
        "{}: wrote {} files in {:.2} s",
        manifest.command,
        manifest.outputs.len(),
        manifest.wall_clock_s
    ));
    Ok(())
}
