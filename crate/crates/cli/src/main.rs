//! `flakit` — failure-logic analysis, fault trees, and fault-injection
//! testing from one binary.
//!
//! Exit codes: 0 on success, 1 when `--strict` is set and the run produced
//! findings (validation diagnostics, disproved rules, skipped scenarios),
//! 2 on usage, file, or parse errors.

mod commands;
mod context;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use context::{Ctx, OutputFormat};

#[derive(Parser)]
#[command(name = "flakit", version, about = "Failure-logic analysis and fault-injection testing toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Injection/detection config file (JSON or `key = value` lines).
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,

    /// Report format on stdout.
    #[arg(long, global = true, default_value = "text")]
    format: OutputFormat,

    /// Campaign seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for test campaigns.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Exit 1 when the run produces findings.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect and validate system models.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Failure-logic analysis.
    #[command(subcommand)]
    Fla(FlaCmd),
    /// Fault-tree generation and analysis.
    #[command(subcommand)]
    Ft(FtCmd),
    /// Fault-injection test campaigns.
    #[command(subcommand)]
    Test(TestCmd),
    /// Rule-file utilities.
    #[command(subcommand)]
    Rules(RulesCmd),
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Validate a model file and print diagnostics.
    Check(commands::model::CheckArgs),
}

#[derive(Subcommand)]
enum FlaCmd {
    /// Propagate failures and print the per-port failure sets.
    Run(commands::fla::RunArgs),
}

#[derive(Subcommand)]
enum FtCmd {
    /// Generate fault trees for a target output port.
    Gen(commands::ft::GenArgs),
    /// Analyze a previously exported fault tree.
    Analyze(commands::ft::AnalyzeArgs),
}

#[derive(Subcommand)]
enum TestCmd {
    /// Discover propagation rules by exhaustive injection.
    Discover(commands::test::DiscoverArgs),
    /// Validate declared rules against injection runs.
    Validate(commands::test::ValidateArgs),
}

#[derive(Subcommand)]
enum RulesCmd {
    /// Generate a rule file from an observation log.
    Gen(commands::rules::GenArgs),
    /// Compare a declared rule file against a learned one.
    Diff(commands::rules::DiffArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match Ctx::new(&cli.global) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::Model(ModelCmd::Check(args)) => commands::model::check(&ctx, &args),
        Command::Fla(FlaCmd::Run(args)) => commands::fla::run(&ctx, &args),
        Command::Ft(FtCmd::Gen(args)) => commands::ft::gen(&ctx, &args),
        Command::Ft(FtCmd::Analyze(args)) => commands::ft::analyze(&ctx, &args),
        Command::Test(TestCmd::Discover(args)) => commands::test::discover(&ctx, &args),
        Command::Test(TestCmd::Validate(args)) => commands::test::validate(&ctx, &args),
        Command::Rules(RulesCmd::Gen(args)) => commands::rules::gen(&ctx, &args),
        Command::Rules(RulesCmd::Diff(args)) => commands::rules::diff(&ctx, &args),
    };

    match result {
        Ok(findings) => {
            if findings && ctx.strict {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
