use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bico::experiment::{load_config, report, run_experiment, Algorithm, ExperimentConfig};
use bico::BicoError;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bico", version, about = "Budgeted simulation optimisation under input uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every replication of an experiment
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Summarise the results found under a directory
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run the fixed-fraction baseline for each p, one subdirectory per p
    SweepP {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn load(path: &Path) -> bico::Result<ExperimentConfig> {
    load_config(path)?.apply_env_seed()
}

fn run_one(cfg: &ExperimentConfig, out: &Path, workers: usize) -> bico::Result<()> {
    let results = run_experiment(cfg, out, workers)?;
    let failed = results.iter().filter(|r| !r.succeeded()).count();
    eprintln!(
        "{}: {} replications in {} ({failed} failed)",
        cfg.algorithm.label(),
        results.len(),
        out.display()
    );
    if failed == results.len() {
        return Err(BicoError::Runtime("every replication failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, workers, out } => load(&config).and_then(|cfg| run_one(&cfg, &out, workers)),
        Command::Report { input, format } => report(&input).and_then(|r| {
            match format {
                Format::Csv => print!("{}", r.to_csv()?),
                Format::Json => println!("{}", serde_json::to_string_pretty(&r)?),
            }
            Ok(())
        }),
        Command::SweepP { config, p, workers, out } => load(&config).and_then(|base| {
            for &p in &p {
                let cfg = ExperimentConfig {
                    algorithm: Algorithm::FixedFraction { p },
                    ..base.clone()
                };
                cfg.validate()?;
                run_one(&cfg, &out.join(cfg.algorithm.label()), workers)?;
            }
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BicoError::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}
