use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracfield_cli::{run_command, threads_from_env, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "fracfield", version, about = "Fractional stochastic field solver and regularity checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Dirichlet eigen-system of the domain.
    Eig(Common),
    /// Spectral diagnostics: transformed eigenvalues and summability.
    Diag(Common),
    /// Exact variogram curves.
    Kernel(Common),
    /// Monte Carlo ensemble.
    Simulate(Common),
    /// Regularity bounds checked against exact curves.
    Analyze(Common),
    /// Every stage enabled under `outputs` in the config.
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed_override: Option<u64>,
}

fn execute(cmd: Command, args: &Common) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        cfg.seed = seed;
    }
    let outcome = match threads_from_env()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::config(fracfield_cli::THREADS_ENV, e.to_string()))?
            .install(|| run_command(cmd, &cfg))?,
        None => run_command(cmd, &cfg)?,
    };
    let manifest = outcome.artifacts.manifest(&cfg.name, cmd.as_str(), cfg.seed);
    outcome.artifacts.commit(&args.out, &manifest)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, f.file);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Eig(a) => (Command::Eig, a),
        Cmd::Diag(a) => (Command::Diag, a),
        Cmd::Kernel(a) => (Command::Kernel, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Run(a) => (Command::Run, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
