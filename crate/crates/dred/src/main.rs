use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dred::commands::{self, CommandError};
use dred::{Problem, Settings, Target};
use dred_core::SelectionStrategy;

/// Double reduction of conserved PDE systems.
#[derive(Parser)]
#[command(name = "dred", version)]
struct Cli {
    /// Random samples for every numeric verification.
    #[arg(long, global = true, default_value_t = 100)]
    samples: usize,
    /// Seed for the numeric oracle and the zero test.
    #[arg(long, global = true, default_value_t = 0x5EED)]
    seed: u64,
    /// Also print a machine-readable dump of the reported expressions.
    #[arg(long, global = true, value_enum)]
    emit: Option<Emit>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Canonical,
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct TargetArgs {
    /// A declared generator.
    #[arg(long)]
    gen: Option<String>,
    /// A linear combination such as "X1 + c1*X2".
    #[arg(long)]
    combo: Option<String>,
}

impl TargetArgs {
    fn target(&self) -> Option<Target> {
        match (&self.gen, &self.combo) {
            (Some(g), _) => Some(Target::Gen(g.clone())),
            (_, Some(c)) => Some(Target::Combo(c.clone())),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    First,
    Exhaustive,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the conserved vector has vanishing divergence on solutions.
    CheckDiv { problem: PathBuf },
    /// Tabulate which generators are associated with the conserved vector.
    CheckAssoc {
        problem: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
    },
    /// One reduction by an associated generator.
    Reduce {
        problem: PathBuf,
        #[command(flatten)]
        target: TargetArgs,
        /// Names for the canonical coordinates, as "new:old" pairs.
        #[arg(long)]
        names: Option<String>,
        /// Old variable whose replacement becomes the canonical variable.
        #[arg(long)]
        pivot: Option<String>,
    },
    /// Reduce repeatedly down to a first integral.
    Pipeline {
        problem: PathBuf,
        #[arg(long, value_enum, conflicts_with = "combo")]
        strategy: Option<Strategy>,
        /// Generator combination for the first stage.
        #[arg(long)]
        combo: Option<String>,
    },
    /// Run every symbolic and numeric check.
    Verify { problem: PathBuf },
}

fn run(cli: &Cli) -> Result<dred::Report, CommandError> {
    let settings = Settings { samples: cli.samples, seed: cli.seed };
    let load = |p: &PathBuf| Problem::load(p).map_err(|e| CommandError(e.to_string()));
    match &cli.command {
        Command::CheckDiv { problem } => commands::check_div(&load(problem)?, &settings),
        Command::CheckAssoc { problem, target } => commands::check_assoc(&load(problem)?, target.target().as_ref(), &settings),
        Command::Reduce { problem, target, names, pivot } => {
            let target = target.target().ok_or_else(|| CommandError("reduce needs --gen or --combo".into()))?;
            commands::reduce(&load(problem)?, &target, names.as_deref(), pivot.as_deref(), &settings)
        }
        Command::Pipeline { problem, strategy, combo } => {
            let strategy = match (strategy, combo) {
                (Some(Strategy::First), _) => Some(SelectionStrategy::FirstDeclared),
                (Some(Strategy::Exhaustive), _) => Some(SelectionStrategy::Exhaustive),
                (None, Some(c)) => Some(SelectionStrategy::Combination(c.clone())),
                (None, None) => None,
            };
            commands::pipeline(&load(problem)?, strategy, &settings)
        }
        Command::Verify { problem } => commands::verify(&load(problem)?, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            print!("{}", report.text());
            if cli.emit.is_some() {
                println!("--- canonical ---");
                print!("{}", report.canonical_text());
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
