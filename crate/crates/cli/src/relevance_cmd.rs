//! Feature-relevance report from a trained checkpoint: relevance.json plus
//! plot-ready relevance.csv and histogram.csv.

use std::path::Path;

use serde::Serialize;

use hsbnn_core::models::{load_checkpoint, VariationalModel};
use hsbnn_core::relevance::{relevance_report, RelevanceReport};

use crate::config::RunConfig;
use crate::{CliError, CliResult, TOOL_VERSION};

#[derive(Debug, Serialize)]
pub struct RelevanceArtifact {
    pub tool_version: String,
    pub checkpoint_model: String,
    #[serde(flatten)]
    pub report: RelevanceReport,
}

pub fn load_checkpoint_checked(
    cfg: &RunConfig,
    checkpoint: &Path,
) -> CliResult<VariationalModel> {
    if !checkpoint.exists() {
        return Err(CliError::usage(format!(
            "checkpoint {} does not exist",
            checkpoint.display()
        )));
    }
    let model = load_checkpoint(checkpoint)?;
    if !cfg.models.is_empty() && !cfg.models.contains(&model.spec.kind) {
        return Err(CliError::usage(format!(
            "checkpoint holds a {} but the config lists models {:?}",
            model.spec.kind.name(),
            cfg.models.iter().map(|m| m.name()).collect::<Vec<_>>()
        )));
    }
    Ok(model)
}

pub fn run(
    cfg: &RunConfig,
    checkpoint: &Path,
    data_dir: &Path,
    out_dir: &Path,
) -> CliResult<RelevanceArtifact> {
    let model = load_checkpoint_checked(cfg, checkpoint)?;
    let ds = cfg.dataset.load(data_dir, cfg.seed)?;
    let names = ds.schema.feature_names();
    let report = relevance_report(&model, &names, cfg.relevance)?;
    let artifact = RelevanceArtifact {
        tool_version: TOOL_VERSION.into(),
        checkpoint_model: model.spec.kind.name().into(),
        report,
    };
    write_artifacts(&artifact, out_dir)?;
    Ok(artifact)
}

pub fn write_artifacts(artifact: &RelevanceArtifact, out_dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    std::fs::write(
        out_dir.join("relevance.json"),
        serde_json::to_string_pretty(artifact).expect("serializable") + "\n",
    )
    .map_err(|e| CliError::runtime(format!("cannot write relevance.json: {e}")))?;

    let mut csv = String::from("feature,score,scale_mode,relevant\n");
    for f in &artifact.report.features {
        let mode = f
            .scale_mode
            .map(|m| m.to_string())
            .unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", f.name, f.score, mode, f.relevant));
    }
    std::fs::write(out_dir.join("relevance.csv"), csv)
        .map_err(|e| CliError::runtime(format!("cannot write relevance.csv: {e}")))?;

    let mut hist = String::from("bin_lo,bin_hi,count\n");
    for b in &artifact.report.histogram.bins {
        hist.push_str(&format!("{},{},{}\n", b.bin_lo, b.bin_hi, b.count));
    }
    std::fs::write(out_dir.join("histogram.csv"), hist)
        .map_err(|e| CliError::runtime(format!("cannot write histogram.csv: {e}")))?;
    Ok(())
}
