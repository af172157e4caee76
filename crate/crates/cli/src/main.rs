use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsbnn_cli::config::{echo_config, load_config, resolve_data_dir, RunConfig};
use hsbnn_cli::recover::RecoverConfig;
use hsbnn_cli::{bench, check, fetch, recover, relevance_cmd, CliError};

#[derive(Parser)]
#[command(
    name = "hsbnn",
    version,
    about = "Bayesian neural networks with tied horseshoe priors: benchmarks, sparse recovery, and feature relevance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated benchmark of the configured models on a dataset.
    Bench {
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dataset cache directory (also via HSBNN_DATA_DIR).
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Sparse-signal recovery experiment with a LinearHorseshoe model.
    Recover {
        /// Recovery configuration JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Feature-relevance report from a trained checkpoint.
    Relevance {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Self-check suite: gradients vs finite differences, KL vs Monte Carlo,
    /// sampler KS tests, auxiliary-update ascent, AUROC oracle.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for diagnostics.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Injects a known defect (negative-control testing).
        #[arg(long, hide = true)]
        fault: Option<String>,
    },
    /// Downloads and normalizes the UCI benchmark datasets.
    Fetch {
        /// One of: yacht, boston, wine, all.
        #[arg(long, default_value = "all")]
        dataset: String,
        /// Target directory; defaults to the data cache directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-dataset source override, e.g. --source yacht=/path/to/raw.
        #[arg(long, value_name = "NAME=URL_OR_PATH")]
        source: Vec<String>,
    },
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Bench { config, seed, out, data_dir } => {
            let loaded = load_config::<RunConfig>(&config)?;
            let mut cfg = loaded.parsed;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out_dir = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| CliError::usage("no output directory: pass --out or set output_dir"))?;
            let data_dir = resolve_data_dir(data_dir.as_deref());
            let ds = cfg.dataset.load(&data_dir, cfg.seed)?;
            echo_config(&out_dir, &loaded.raw)?;
            let result = bench::run(&cfg, &ds, &out_dir)?;
            for m in &result.models {
                for nm in &m.metrics {
                    println!(
                        "{} {}: {:.4} ± {:.4}",
                        m.model, nm.name, nm.summary.mean, nm.summary.standard_error
                    );
                }
            }
            println!("artifacts written to {}", out_dir.display());
            Ok(())
        }
        Command::Recover { config, seed, out } => {
            let (raw, mut cfg) = match config {
                Some(path) => {
                    let loaded = load_config::<RecoverConfig>(&path)?;
                    (Some(loaded.raw), loaded.parsed)
                }
                None => (None, RecoverConfig::default()),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(raw) = raw {
                echo_config(&out, &raw)?;
            }
            let report = recover::run(&cfg, &out)?;
            println!(
                "recovery error over {} repeats: {:.4} ± {:.4}",
                report.errors.len(),
                report.mean_error,
                report.std_error
            );
            Ok(())
        }
        Command::Relevance { config, checkpoint, out, data_dir } => {
            let loaded = load_config::<RunConfig>(&config)?;
            let data_dir = resolve_data_dir(data_dir.as_deref());
            echo_config(&out, &loaded.raw)?;
            let artifact = relevance_cmd::run(&loaded.parsed, &checkpoint, &data_dir, &out)?;
            let relevant = artifact.report.relevant_names();
            println!(
                "threshold {:.4e}; {} of {} features relevant: {}",
                artifact.report.threshold,
                relevant.len(),
                artifact.report.features.len(),
                relevant.join(", ")
            );
            Ok(())
        }
        Command::Check { seed, out, fault } => {
            let report = check::run(seed, fault.as_deref(), out.as_deref())?;
            if report.passed() {
                println!("all checks passed");
                Ok(())
            } else {
                Err(CliError::runtime("one or more checks failed"))
            }
        }
        Command::Fetch { dataset, out, source } => {
            let out_dir = out.unwrap_or_else(|| resolve_data_dir(None));
            let mut overrides = std::collections::HashMap::new();
            for s in &source {
                let (name, url) = s.split_once('=').ok_or_else(|| {
                    CliError::usage(format!("--source must look like name=url, got '{s}'"))
                })?;
                overrides.insert(name.to_string(), url.to_string());
            }
            let names: Vec<&str> = if dataset == "all" {
                fetch::DATASETS.iter().map(|d| d.name).collect()
            } else {
                vec![fetch::descriptor(&dataset)?.name]
            };
            for name in names {
                let outcome =
                    fetch::fetch_one(name, overrides.get(name).map(String::as_str), &out_dir)?;
                println!(
                    "{}: {} rows, sha256 {}{}",
                    outcome.name,
                    outcome.rows,
                    outcome.sha256,
                    if outcome.verified { " (verified)" } else { " (UNPINNED)" }
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
