//! `resgru`: prepare the Cleveland data, run cross-validated experiments and
//! render their results.

mod commands;
mod config;
mod manifest;
mod report;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bad flags, unreadable inputs and similar caller mistakes; exits with 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Directory holding the prepared dataset when `--data` is not given.
pub const CACHE_ENV: &str = "RESGRU_CACHE_DIR";
const DEFAULT_CACHE: &str = ".resgru-cache";

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE))
}

#[derive(Parser)]
#[command(name = "resgru", version, about = "Residual GRU + attention classifier for tabular heart-disease data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    /// Prepared dataset: a CSV file or the directory `prepare` wrote.
    /// Defaults to the cache directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Flat TOML file with model, training and protocol keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set epochs=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    /// Worker threads over fold × seed cells. 1 keeps logs in order.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Suppress per-fold progress lines on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProjectionMethod {
    Tsne,
    Pca,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the raw Cleveland file and write the prepared CSV and schema.
    Prepare {
        #[arg(long, conflicts_with = "fetch_url", required_unless_present = "fetch_url")]
        input: Option<PathBuf>,
        #[arg(long)]
        fetch_url: Option<String>,
        /// Defaults to the cache directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate one model variant.
    Cv {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "full")]
        variant: String,
        /// Also write every fold's trained model.
        #[arg(long)]
        save_models: bool,
    },
    /// Cross-validate the ablation variants (all of them by default).
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
    },
    /// Cross-validate the classical baselines.
    Baselines {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "gnb,logreg,knn")]
        models: Vec<String>,
    },
    /// Compare class separation of raw features and learned embeddings, and
    /// draw 2-D projections of both.
    Project {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "full")]
        variant: String,
        #[arg(long, value_enum, default_value = "tsne")]
        method: ProjectionMethod,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
    },
    /// Render tables and plot data from every folds.csv under a directory.
    Report {
        results: PathBuf,
        /// Defaults to the results directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<resgru_core::Error>() {
            use resgru_core::Error as E;
            return match e {
                E::Config(_) | E::Format { .. } | E::Data(_) | E::Schema { .. } | E::Stratification(_) | E::Artifact(_) => 2,
                E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare { input, fetch_url, out } => commands::prepare(input, fetch_url, out.unwrap_or_else(cache_dir)),
        Command::Cv { run, variant, save_models } => commands::cv(&run, &variant, save_models),
        Command::Ablate { run, variants } => commands::ablate(&run, &variants),
        Command::Baselines { run, models } => commands::baselines(&run, &models),
        Command::Project {
            run,
            variant,
            method,
            perplexity,
            iterations,
        } => commands::project(&run, &variant, method, perplexity, iterations),
        Command::Report { results, out } => {
            let out = out.unwrap_or_else(|| results.clone());
            commands::report(&results, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
