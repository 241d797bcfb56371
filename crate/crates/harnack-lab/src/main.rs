use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use harnack_lab::config::{ExperimentConfig, ExperimentKind};
use harnack_lab::runner;

/// Numerical experiments on sharp Harnack constants, strong maximum
/// principles and Landis-type decay for elliptic operators.
#[derive(Parser)]
#[command(name = "harnack-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (TOML); see README for the schema.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's grid spacing.
    #[arg(long)]
    grid_h: Option<f64>,
    /// Halve h this many times and extrapolate where applicable.
    #[arg(long)]
    refine: Option<u32>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Full Harnack inequality measurements over an R grid.
    Harnack(RunArgs),
    /// Weak Harnack (eps-integral) measurements.
    WeakHarnack(RunArgs),
    /// Local maximum principle measurements.
    LocalMax(RunArgs),
    /// ABP ratio on a unit-diameter domain.
    Abp(RunArgs),
    /// Chain-cover geometry sweep.
    Chain(RunArgs),
    /// M_delta decay traces and the integral dichotomy.
    Smp(RunArgs),
    /// Dead-core profile construction.
    DeadCore(RunArgs),
    /// Positive-solution decay on an exterior domain.
    Landis(RunArgs),
    /// Explicit ODE rates.
    Oracle(RunArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Harnack(_) => ExperimentKind::Harnack,
            Command::WeakHarnack(_) => ExperimentKind::WeakHarnack,
            Command::LocalMax(_) => ExperimentKind::LocalMax,
            Command::Abp(_) => ExperimentKind::Abp,
            Command::Chain(_) => ExperimentKind::Chain,
            Command::Smp(_) => ExperimentKind::Smp,
            Command::DeadCore(_) => ExperimentKind::DeadCore,
            Command::Landis(_) => ExperimentKind::Landis,
            Command::Oracle(_) => ExperimentKind::Oracle,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Harnack(a)
            | Command::WeakHarnack(a)
            | Command::LocalMax(a)
            | Command::Abp(a)
            | Command::Chain(a)
            | Command::Smp(a)
            | Command::DeadCore(a)
            | Command::Landis(a)
            | Command::Oracle(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args().clone();
    let mut config = match ExperimentConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    // the subcommand selects the kind; flags override config values
    config.kind = cli.command.kind();
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(h) = args.grid_h {
        config.h = h;
    }
    if let Some(r) = args.refine {
        config.refine = r;
    }
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match runner::run(&config, &args.out) {
        Ok(report) => {
            for line in &report.summary {
                println!("{line}");
            }
            for path in &report.csv_paths {
                println!("wrote {}", path.display());
            }
            if report.violations > 0 {
                println!("{} inequality violation(s) found", report.violations);
            }
            ExitCode::from(runner::exit_code(&report) as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
