//! `emgcode` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "emgcode", version, about = "EMG multi-code biometric authentication toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed for every random draw; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Proceed with an incomplete dataset tree.
    #[arg(long, global = true)]
    pub allow_partial: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index a dataset tree and report missing records.
    Scan(commands::ScanArgs),
    /// Extract feature series for every record of a dataset.
    Features(commands::FeaturesArgs),
    /// Enroll per-(user, gesture) templates into a template store.
    Enroll(commands::EnrollArgs),
    /// Authenticate one attempt against a claimed user.
    Verify(commands::VerifyArgs),
    /// Run the evaluation protocols and write report files.
    Evaluate(commands::EvaluateArgs),
    /// Generate a synthetic dataset tree.
    Synth(commands::SynthArgs),
    /// Print the cohort summary of an existing report.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    // die quietly when piped into `head` and friends
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
