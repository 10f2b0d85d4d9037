use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use tracefem::study::{run_study, StudyConfig, StudyKind};
use tracefem::Error;

#[derive(Parser)]
#[command(name = "tracefem", version, about = "Membrane studies on reconstructed level-set surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Distance and normal errors of the reconstructed surface.
    Reconstruct(Common),
    /// Membrane solve on the first configured level, with VTK output.
    Solve(Common),
    /// Stress error convergence over the configured levels.
    Convergence(Common),
    /// Stress error sweep or per-level weight optimization.
    Gamma(Common),
}

#[derive(Args)]
struct Common {
    /// JSON study configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "TRACEFEM_OUT", default_value = "out")]
    out: PathBuf,
    /// Print per-level progress to stderr.
    #[arg(long)]
    verbose: bool,
}

fn report(err: &Error) -> String {
    json!({
        "kind": err.kind(),
        "message": err.to_string(),
        "elements": err.elements(),
    })
    .to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Reconstruct(a) => (StudyKind::Reconstruct, a),
        Command::Solve(a) => (StudyKind::Solve, a),
        Command::Convergence(a) => (StudyKind::Convergence, a),
        Command::Gamma(a) => (StudyKind::GammaSweep, a),
    };
    let verbose = args.verbose;
    let mut log = |line: &str| {
        if verbose {
            eprintln!("{line}");
        }
    };
    let result = StudyConfig::load(&args.config).and_then(|cfg| run_study(&cfg, kind, &args.out, &mut log));
    match result {
        Ok(output) => {
            for f in &output.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", report(&err));
            match err {
                Error::Config(_) | Error::Json(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
