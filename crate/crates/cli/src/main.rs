//! `brw` — experiment runner for the branching random walk toolkit.
//!
//! Every subcommand loads a TOML config (flags and `--override` assignments
//! take precedence), runs the corresponding experiment, and writes its
//! artifacts plus a `manifest.txt` of content hashes. Exit codes: 0 when all
//! statistical gates pass, 2 when a gate fails, 1 on runtime errors. The
//! manifest is written even when the run errors out.

mod artifacts;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::artifacts::ArtifactWriter;
use crate::config::{CliOverrides, ConfigError, ExperimentKind};

const EXIT_STAT_FAILURE: u8 = 2;
const EXIT_RUNTIME_ERROR: u8 = 1;

#[derive(Parser)]
#[command(
    name = "brw",
    version,
    about = "Simulator and verification toolkit for branching random walks \
             with log-slowly-varying displacement tails",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate normalizing sequences for the configured laws.
    Normalize(RunArgs),
    /// Simulate tree replicates and record extremal snapshots.
    Simulate(RunArgs),
    /// Draw realizations of the limiting point process.
    LimitSample(RunArgs),
    /// Check the normalized maximum against its limit law.
    VerifyMax(RunArgs),
    /// Check window point counts against the limit process.
    VerifyPp(RunArgs),
    /// Check truncated exponential-moment bounds.
    VerifyLemmas(RunArgs),
    /// Check cluster constants and the offspring-law limits.
    VerifyGw(RunArgs),
    /// Consolidate reports found under an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; takes precedence over the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; takes precedence over the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; takes precedence over the config. Results never
    /// depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Config assignment `section.key=value`; may be repeated.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Config of kind `report` naming the directory to consolidate.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory whose run subdirectories are consolidated; takes
    /// precedence over the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Normalize(args) => run_experiment(ExperimentKind::Normalize, args),
        Command::Simulate(args) => run_experiment(ExperimentKind::Simulate, args),
        Command::LimitSample(args) => run_experiment(ExperimentKind::LimitSample, args),
        Command::VerifyMax(args) => run_experiment(ExperimentKind::VerifyMax, args),
        Command::VerifyPp(args) => run_experiment(ExperimentKind::VerifyPp, args),
        Command::VerifyLemmas(args) => run_experiment(ExperimentKind::VerifyLemmas, args),
        Command::VerifyGw(args) => run_experiment(ExperimentKind::VerifyGw, args),
        Command::Report(args) => run_report(args),
    }
}

fn run_experiment(kind: ExperimentKind, args: RunArgs) -> ExitCode {
    let overrides = CliOverrides {
        seed: args.seed,
        out: args.out,
        threads: args.threads,
        assignments: args.overrides,
    };
    let cfg = match config::load(&args.config, kind, &overrides) {
        Ok(cfg) => cfg,
        Err(err) => return print_config_error(&err),
    };
    let mut writer = match ArtifactWriter::create(&cfg.out) {
        Ok(writer) => writer,
        Err(err) => {
            eprintln!("error: cannot open output directory: {err}");
            return ExitCode::from(EXIT_RUNTIME_ERROR);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
    {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: cannot build worker pool: {err}");
            return ExitCode::from(EXIT_RUNTIME_ERROR);
        }
    };
    let outcome = pool.install(|| run::execute(&cfg, &mut writer));
    finish(writer, outcome)
}

fn run_report(args: ReportArgs) -> ExitCode {
    let dir = match (&args.config, args.out) {
        (Some(path), out) => {
            let overrides = CliOverrides {
                out,
                ..CliOverrides::default()
            };
            match config::load(path, ExperimentKind::Report, &overrides) {
                Ok(cfg) => cfg.out,
                Err(err) => return print_config_error(&err),
            }
        }
        (None, Some(out)) => out,
        (None, None) => PathBuf::from("out"),
    };
    let mut writer = match ArtifactWriter::create(&dir) {
        Ok(writer) => writer,
        Err(err) => {
            eprintln!("error: cannot open output directory: {err}");
            return ExitCode::from(EXIT_RUNTIME_ERROR);
        }
    };
    let outcome = run::consolidate(&dir, &mut writer);
    finish(writer, outcome)
}

/// Writes the manifest (even when the run failed) and maps the outcome onto
/// the exit-code contract.
fn finish(writer: ArtifactWriter, outcome: Result<bool, run::RunError>) -> ExitCode {
    if let Err(err) = writer.finish() {
        eprintln!("error: cannot write manifest: {err}");
        return ExitCode::from(EXIT_RUNTIME_ERROR);
    }
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("statistical gate failed (see report.json)");
            ExitCode::from(EXIT_STAT_FAILURE)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_RUNTIME_ERROR)
        }
    }
}

fn print_config_error(err: &ConfigError) -> ExitCode {
    match err {
        ConfigError::Invalid(violations) => {
            eprintln!("invalid configuration ({} violation(s)):", violations.len());
            for violation in violations {
                eprintln!("  [{}] {}", violation.code, violation.message);
            }
        }
        other => eprintln!("error: {other}"),
    }
    ExitCode::from(EXIT_RUNTIME_ERROR)
}
