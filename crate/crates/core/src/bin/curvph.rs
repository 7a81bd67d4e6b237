use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use curvph::config::{ExperimentConfig, Task};
use curvph::runner::{self, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "curvph", version, about = "Cone-criterion experiments on Jacobi operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and samples.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the criterion on sampled cone vectors
    Criterion(Common),
    /// Gap functions alpha, beta and the uniform gap
    Gap(Common),
    /// Lyapunov spectrum and splitting dimensions
    Lyapunov(Common),
    /// Finite-time cone invariance
    Cones(Common),
    /// Fraction of time spent in the bad set
    Badset(Common),
    /// Tolerance on the derivative of the split
    Epsilon(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Criterion(c) => (Task::Criterion, c),
        Command::Gap(c) => (Task::Gap, c),
        Command::Lyapunov(c) => (Task::Lyapunov, c),
        Command::Cones(c) => (Task::Cones, c),
        Command::Badset(c) => (Task::Badset, c),
        Command::Epsilon(c) => (Task::Epsilon, c),
    };
    let code = match load(&common, task) {
        Ok(cfg) => runner::run_experiment(&cfg, common.out.as_deref()),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}

fn load(common: &Common, task: Task) -> curvph::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg = ExperimentConfig::parse_unvalidated(&text)?;
    cfg.task = task;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}
