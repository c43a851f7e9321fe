use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use observer_synth_cli::{cmd_design, cmd_lipschitz, cmd_report, cmd_run, cmd_simulate, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "observer-synth", version, about = "Observer synthesis for Lipschitz-nonlinear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized stage; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write the design LMIs as `problem.dat-s`.
    #[arg(long, global = true)]
    export_sdpa: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Estimate the Lipschitz constant over the model domain.
    Lipschitz,
    /// Solve the design LMIs and certify the gains.
    Design,
    /// Co-simulate plant, observer and baselines.
    Simulate,
    /// Summarize earlier artifacts.
    Report,
    /// lipschitz, design, simulate and report in sequence.
    Run,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("OBSERVER_SYNTH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("OBSERVER_SYNTH_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    configure_threads()?;
    let path = cli.config.as_ref().ok_or_else(|| CliError::validation("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.out_override = cli.out.clone();
    if let Some(seed) = cli.seed {
        cfg.config.set_seed(seed);
    }
    if cli.export_sdpa {
        cfg.config.design.export_sdpa = true;
    }
    match cli.command {
        Command::Lipschitz => cmd_lipschitz(&cfg),
        Command::Design => cmd_design(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Report => cmd_report(&cfg),
        Command::Run => cmd_run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
