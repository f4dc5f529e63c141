//! Thin command-line front end over the pipeline stages in
//! [`ecoref::cli`].

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecoref::cli::{self, CliError, MethodSelection, RunConfig, TargetSelection};

#[derive(Parser)]
#[command(
    name = "ecoref",
    about = "Estimates latent journal quality from aggregate research-assessment profiles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read raw submission and results files into model-ready artifacts.
    Ingest(CommonArgs),
    /// Fit the selected methods and write league tables, predictions and
    /// diagnostics.
    Fit(CommonArgs),
    /// Cross-validate the pseudo-data regularization strength.
    Cv(CommonArgs),
    /// Render a human-readable summary from fit artifacts.
    Report(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random substream.
    #[arg(long)]
    seed: Option<u64>,
    /// Fitting method: hmc, em or both.
    #[arg(long)]
    method: Option<String>,
    /// Target level: 4star, 3plus or both.
    #[arg(long)]
    target: Option<String>,
    /// Minimum article count for a journal to get its own column.
    #[arg(long)]
    threshold: Option<usize>,
    /// Artifact directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// External journal metrics CSV (journal_key, issn, score).
    #[arg(long)]
    metrics_csv: Option<PathBuf>,
    /// Base URL of the DOI metadata service.
    #[arg(long)]
    resolver_url: Option<String>,
    /// On-disk DOI metadata cache (enables offline replay).
    #[arg(long)]
    resolver_cache: Option<PathBuf>,
}

impl CommonArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(method) = &self.method {
            config.method = MethodSelection::parse(method).ok_or_else(|| {
                CliError::Usage(format!("unknown method {method:?} (hmc|em|both)"))
            })?;
        }
        if let Some(target) = &self.target {
            config.target = TargetSelection::parse(target).ok_or_else(|| {
                CliError::Usage(format!("unknown target {target:?} (4star|3plus|both)"))
            })?;
        }
        if let Some(threshold) = self.threshold {
            config.threshold = threshold;
        }
        if let Some(out_dir) = self.out_dir {
            config.out_dir = out_dir;
        }
        if let Some(metrics_csv) = self.metrics_csv {
            config.metrics_csv = Some(metrics_csv);
        }
        if let Some(url) = self.resolver_url {
            config.resolver_url = Some(url);
        }
        if let Some(cache) = self.resolver_cache {
            config.resolver_cache = Some(cache);
        }
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let run = || -> Result<(), CliError> {
        match cli.command {
            Command::Ingest(args) => cli::cmd_ingest(&args.into_config()?),
            Command::Fit(args) => cli::cmd_fit(&args.into_config()?),
            Command::Cv(args) => cli::cmd_cv(&args.into_config()?),
            Command::Report(args) => cli::cmd_report(&args.into_config()?),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
