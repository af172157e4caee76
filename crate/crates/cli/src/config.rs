//! Run configuration: JSON schema shared by the `bench`, `recover`, and
//! `relevance` subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hsbnn_core::data::{self, Dataset, Schema};
use hsbnn_core::models::ModelKind;
use hsbnn_core::relevance::RelevanceMethod;
use hsbnn_core::training::TrainConfig;

use crate::{CliError, CliResult};

pub const DATA_DIR_ENV: &str = "HSBNN_DATA_DIR";

/// Resolution order for the dataset cache directory: explicit flag, then the
/// `HSBNN_DATA_DIR` environment variable, then `./data`.
pub fn resolve_data_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(p) = std::env::var(DATA_DIR_ENV) {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    PathBuf::from("data")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    /// Explicit CSV + schema JSON paths.
    Csv { csv: PathBuf, schema: PathBuf },
    /// A dataset fetched into the cache directory by `hsbnn fetch`.
    Builtin { builtin: String },
    /// Synthetic relevance-recovery classification set, seeded by the run.
    SynthRelevance { synth_relevance: SynthRelevanceParams },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthRelevanceParams {
    pub n: usize,
    pub d_relevant: usize,
    pub d_noise: usize,
}

impl DatasetSource {
    pub fn label(&self) -> String {
        match self {
            DatasetSource::Csv { csv, .. } => csv.display().to_string(),
            DatasetSource::Builtin { builtin } => builtin.clone(),
            DatasetSource::SynthRelevance { synth_relevance: p } => format!(
                "synth_relevance(n={}, d_relevant={}, d_noise={})",
                p.n, p.d_relevant, p.d_noise
            ),
        }
    }

    /// Loads the raw (unpreprocessed) dataset.
    pub fn load(&self, data_dir: &Path, seed: u64) -> CliResult<Dataset> {
        match self {
            DatasetSource::Csv { csv, schema } => {
                let schema = Schema::from_json_file(schema)
                    .map_err(|e| CliError::usage(format!("schema: {e}")))?;
                data::load_csv(csv, &schema).map_err(CliError::from)
            }
            DatasetSource::Builtin { builtin } => {
                let csv = data_dir.join(format!("{builtin}.csv"));
                let schema_path = data_dir.join(format!("{builtin}.schema.json"));
                if !csv.exists() || !schema_path.exists() {
                    return Err(CliError::usage(format!(
                        "builtin dataset '{builtin}' not found under {}; run `hsbnn fetch --dataset {builtin} --out {}` first",
                        data_dir.display(),
                        data_dir.display()
                    )));
                }
                let schema = Schema::from_json_file(&schema_path)
                    .map_err(|e| CliError::usage(format!("schema: {e}")))?;
                data::load_csv(&csv, &schema).map_err(CliError::from)
            }
            DatasetSource::SynthRelevance { synth_relevance: p } => {
                let (ds, _) = data::synth_relevance_classification(
                    p.n,
                    p.d_relevant,
                    p.d_noise,
                    crate::derive_seed(seed, "synth_relevance"),
                );
                Ok(ds)
            }
        }
    }
}

fn default_folds() -> usize {
    10
}
fn default_hidden() -> usize {
    50
}
fn default_unit() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_relevance() -> RelevanceMethod {
    RelevanceMethod::Gap
}

/// Top-level configuration for `bench` and `relevance`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_hidden")]
    pub n_hidden: usize,
    #[serde(default = "default_unit")]
    pub b0: f64,
    #[serde(default = "default_unit")]
    pub bg: f64,
    #[serde(default = "default_unit")]
    pub sigma_prior: f64,
    #[serde(default = "default_relevance")]
    pub relevance: RelevanceMethod,
    /// Train one model per kind on the full dataset and write checkpoints.
    #[serde(default = "default_true")]
    pub save_checkpoints: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.models.is_empty() {
            return Err(CliError::usage("config field 'models' must not be empty"));
        }
        if self.cv_folds < 2 {
            return Err(CliError::usage(
                "config field 'cv_folds' must be at least 2",
            ));
        }
        self.train
            .validate()
            .map_err(|e| CliError::usage(format!("config field 'train': {e}")))?;
        if !(self.b0 > 0.0 && self.bg > 0.0 && self.sigma_prior > 0.0) {
            return Err(CliError::usage(
                "config fields 'b0', 'bg', 'sigma_prior' must be positive",
            ));
        }
        Ok(())
    }
}

/// Raw config bytes plus the parsed structure; the bytes are echoed verbatim
/// into the run directory.
pub struct LoadedConfig<T> {
    pub raw: Vec<u8>,
    pub parsed: T,
}

pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<LoadedConfig<T>> {
    let raw = std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let parsed: T = serde_json::from_slice(&raw)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    Ok(LoadedConfig { raw, parsed })
}

/// Writes the byte-identical config echo into the run directory.
pub fn echo_config(out_dir: &Path, raw: &[u8]) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    std::fs::write(out_dir.join("config.json"), raw)
        .map_err(|e| CliError::runtime(format!("cannot write config echo: {e}")))?;
    Ok(())
}
