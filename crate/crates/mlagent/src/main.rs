use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlagent::{cmd_run, cmd_stats, cmd_validate, CmdOutput, RunArgs};

#[derive(Parser)]
#[command(
    name = "mlagent",
    version,
    about = "Run and inspect multi-level agent simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Shipped scenario: epidemic, configuration, mediation or custom.
    #[arg(long)]
    scenario: Option<String>,
    /// Config file; overrides the shipped default.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override as dotted.key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and print every diagnostic.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// Run a scenario and print the trace digest.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
        /// Trace output file (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with code 2 on protocol violations or overdue obligations.
        #[arg(long)]
        conformance: bool,
        /// Write the final affinity weights to this file.
        #[arg(long, value_name = "PATH")]
        weights_report: Option<PathBuf>,
    },
    /// Summarize a trace file.
    Stats { trace: PathBuf },
}

fn main() -> ExitCode {
    let out: CmdOutput = match Cli::parse().command {
        Command::Validate { source } => cmd_validate(
            source.scenario.as_deref(),
            source.config.as_deref(),
            &source.params,
        ),
        Command::Run {
            source,
            seed,
            steps,
            out,
            conformance,
            weights_report,
        } => cmd_run(&RunArgs {
            scenario: source.scenario,
            config: source.config,
            seed,
            steps,
            out,
            conformance,
            weights_report,
            params: source.params,
        }),
        Command::Stats { trace } => cmd_stats(&trace),
    };
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    ExitCode::from(out.code as u8)
}
