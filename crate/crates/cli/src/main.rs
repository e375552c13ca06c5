use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpcp_cli::{commands, CliError, ExperimentConfig, Report};

#[derive(Parser)]
#[command(name = "cpcp", version, about = "Compressive principal component pursuit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Override one config key, e.g. `--set rho=[0.02,0.4]`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance bundles for every grid cell and trial.
    Generate(Common),
    /// Solve one bundle.
    Solve {
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Build and verify a dual certificate for one bundle.
    Certify {
        bundle: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recovery success rates over the grid.
    PhaseGrid(Common),
    /// Empirical checks of the lemma inequalities.
    ValidateLemmas(Common),
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut sets = self.set.clone();
        if let Some(seed) = self.seed {
            sets.push(format!("seed={seed}"));
        }
        if let Some(out) = &self.out {
            sets.push(format!("out={:?}", out.display().to_string()));
        }
        ExperimentConfig::resolve(self.config.as_deref(), &sets)
    }
}

fn run(cli: Cli) -> Result<Report, CliError> {
    let common = match &cli.command {
        Command::Generate(c) | Command::PhaseGrid(c) | Command::ValidateLemmas(c) => c,
        Command::Solve { common, .. } | Command::Certify { common, .. } => common,
    };
    let cfg = common.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Generate(_) => commands::generate(&cfg),
        Command::Solve { bundle, .. } => commands::solve(bundle, &cfg),
        Command::Certify { bundle, .. } => commands::certify(bundle, &cfg),
        Command::PhaseGrid(_) => commands::phase_grid(&cfg),
        Command::ValidateLemmas(_) => commands::validate_lemmas(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(Cli::parse()) {
        Ok(report) => {
            print!("{}", cpcp::json::to_string_pretty(&report.value));
            if let Some(msg) = &report.failure {
                eprintln!("{msg}");
            }
            report.exit_code()
        }
        Err(e) => {
            eprint!("{}", cpcp::json::to_string_pretty(&e.to_json()));
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
