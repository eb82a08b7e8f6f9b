use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lipset_cli::{run, Command, Resolved, RunConfig};

#[derive(Parser)]
#[command(name = "lipset", version, about = "Set-valued models of Lipschitz dynamics learned from trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate trajectories and write the residual dataset
    Simulate(RunArgs),
    /// Build the envelope from the dataset
    Learn(RunArgs),
    /// Per-coordinate intervals and diameter bounds at the query points
    Query(RunArgs),
    /// Outer ellipsoids of the slices at the query points
    Ellipsoid(RunArgs),
    /// Synthesize and verify an ellipsoidal invariant set
    Invariant(RunArgs),
    /// Run the whole pipeline and write a summary
    Report(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory (overrides `out_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Learn(a) => (Command::Learn, a),
        Sub::Query(a) => (Command::Query, a),
        Sub::Ellipsoid(a) => (Command::Ellipsoid, a),
        Sub::Invariant(a) => (Command::Invariant, a),
        Sub::Report(a) => (Command::Report, a),
    };
    lipset_core::par::init_thread_pool();
    let result = RunConfig::load(&args.config)
        .and_then(|cfg| Resolved::new(cfg, args.seed, args.out))
        .and_then(|cfg| run(cmd, &cfg));
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
