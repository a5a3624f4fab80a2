use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gallrisk::pipeline::{run_pipeline, run_stage, with_threads, Manifest, PipelineConfig, Stage};
use gallrisk::Result;

/// Gallstone risk modelling pipeline.
#[derive(Parser)]
#[command(name = "gallrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Every enabled stage in order.
    Run(Common),
    /// Adaptive LASSO screening.
    Select(Common),
    /// BART importance and interaction scores.
    BartScores(Common),
    /// ODE trajectories and per-row interaction features.
    SimulateOdes(Common),
    /// Bayesian logistic regression on the final covariates.
    FitBayes(Common),
    /// Logistic, random forest and BART on a held-out split.
    Evaluate(Common),
    /// Prints the effective configuration as TOML.
    PrintConfig(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        if let Some(out) = &self.out {
            c.out = out.clone();
        }
        Ok(c)
    }
}

fn report(manifest: &Manifest, out: &std::path::Path) {
    for stage in &manifest.stages {
        println!("{:<14} {:>8.2}s  {}", stage.name, stage.seconds, stage.artifacts.join(", "));
    }
    println!("artifacts in {}", out.display());
}

fn execute(command: Command) -> Result<()> {
    let (common, stage) = match command {
        Command::PrintConfig(common) => {
            print!("{}", common.load()?.to_toml()?);
            return Ok(());
        }
        Command::Run(c) => (c, None),
        Command::Select(c) => (c, Some(Stage::Select)),
        Command::BartScores(c) => (c, Some(Stage::BartScores)),
        Command::SimulateOdes(c) => (c, Some(Stage::SimulateOdes)),
        Command::FitBayes(c) => (c, Some(Stage::FitBayes)),
        Command::Evaluate(c) => (c, Some(Stage::Evaluate)),
    };
    let config = common.load()?;
    let out = config.out.clone();
    let manifest = with_threads(common.threads, move || match stage {
        None => run_pipeline(config),
        Some(s) => run_stage(config, s),
    })??;
    report(&manifest, &out);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
