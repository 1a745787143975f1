use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use screenaudit_cli::config::{AuditConfig, Overrides};
use screenaudit_cli::{
    cmd_diff, cmd_evaluate, cmd_generate, cmd_ingest, cmd_report, cmd_score, CliError,
};

#[derive(Parser)]
#[command(name = "screenaudit")]
#[command(about = "Pairwise resume-screening audits with known ground truth")]
#[command(version)]
struct Cli {
    /// Audit configuration file
    #[arg(long, global = true, default_value = "audit.toml")]
    config: PathBuf,

    /// Override the master seed (shifts every derived stream)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the artifact root from the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Validate job documents and persist the job store
    Ingest {
        /// Documents or directories; overrides the config's `jobs` list
        paths: Vec<PathBuf>,
    },
    /// Build the pair suite from the ingested jobs
    Generate,
    /// Run the comparator grid over the suite, appending to the run log
    Evaluate,
    /// Compute metrics from the run log
    Score,
    /// Render CSV tables and the Markdown summary from stored metrics
    Report,
    /// Compare two scored run roots, slice by slice
    Diff { run_a: PathBuf, run_b: PathBuf },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Commands::Diff { run_a, run_b } = &cli.command {
        let out = cmd_diff(run_a, run_b)?;
        print!("{out}");
        return Ok(ExitCode::SUCCESS);
    }
    let overrides = Overrides { seed: cli.seed, out: cli.out };
    let mut config = AuditConfig::load(&cli.config, &overrides)?;
    match cli.command {
        Commands::Ingest { paths } => {
            if !paths.is_empty() {
                config.job_paths = paths;
            }
            let summary = cmd_ingest(&config)?;
            print!("{summary}");
            Ok(if summary.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Commands::Generate => {
            print!("{}", cmd_generate(&config)?);
            Ok(ExitCode::SUCCESS)
        }
        Commands::Evaluate => {
            print!("{}", cmd_evaluate(&config)?);
            Ok(ExitCode::SUCCESS)
        }
        Commands::Score => {
            print!("{}", cmd_score(&config)?);
            Ok(ExitCode::SUCCESS)
        }
        Commands::Report => {
            print!("{}", cmd_report(&config)?);
            Ok(ExitCode::SUCCESS)
        }
        Commands::Diff { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
