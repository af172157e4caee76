//! Sparse-signal recovery experiment: repeated draws of a sparse linear
//! problem, a LinearHorseshoe fit on each, and the relative reconstruction
//! error ‖ŵ − w‖/‖w‖ of the posterior-mean weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use hsbnn_core::data::synth_sparse_linear;
use hsbnn_core::models::{
    first_layer_posterior_mean, init_model, ModelKind, ModelSpec, Task,
};
use hsbnn_core::training::{train, TrainConfig};

use crate::{derive_seed, CliError, CliResult, TOOL_VERSION};

fn default_n() -> usize {
    75
}
fn default_d() -> usize {
    512
}
fn default_k() -> usize {
    20
}
fn default_noise() -> f64 {
    0.005
}
fn default_repeats() -> usize {
    20
}
fn default_train() -> TrainConfig {
    TrainConfig { epochs: 200_000, ..TrainConfig::default() }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_k")]
    pub k_nonzero: usize,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_unit")]
    pub b0: f64,
    #[serde(default = "default_unit")]
    pub bg: f64,
    #[serde(default = "default_train")]
    pub train: TrainConfig,
}

fn default_unit() -> f64 {
    1.0
}

impl Default for RecoverConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

#[derive(Debug, Serialize)]
pub struct RecoveryReport {
    pub tool_version: String,
    pub n: usize,
    pub d: usize,
    pub k_nonzero: usize,
    pub noise_std: f64,
    pub epochs: usize,
    pub seed: u64,
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
}

/// ‖estimate − truth‖ / ‖truth‖.
pub fn relative_error(estimate: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimate.len(), truth.len());
    let diff: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = truth.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm
}

/// Runs one repeat and returns (relative error, ŵ, w).
pub fn run_single(cfg: &RecoverConfig, repeat: usize) -> CliResult<(f64, Vec<f64>, Vec<f64>)> {
    let seed = derive_seed(cfg.seed, &format!("recover-{repeat}"));
    let (ds, w_true) = synth_sparse_linear(cfg.n, cfg.d, cfg.k_nonzero, cfg.noise_std, seed);
    let spec = ModelSpec {
        kind: ModelKind::LinearHorseshoe,
        task: Task::Regression,
        n_features: cfg.d,
        n_hidden: 0,
        b0: cfg.b0,
        bg: cfg.bg,
        sigma_prior: 1.0,
    };
    let model = init_model(spec, derive_seed(seed, "init"))?;
    let mut train_cfg = cfg.train;
    train_cfg.seed = derive_seed(seed, "train");
    // The recovery experiment runs on the raw hypersphere data; no
    // standardization.
    let (trained, _) = train(&model, ds.x.view(), ds.y.view(), &train_cfg)
        .map_err(|e| CliError::runtime(format!("recovery repeat {repeat} aborted: {e}")))?;
    let w_hat: Vec<f64> = first_layer_posterior_mean(&trained).row(0).to_vec();
    let err = relative_error(&w_hat, w_true.as_slice().expect("contiguous"));
    Ok((err, w_hat, w_true.to_vec()))
}

pub fn run(cfg: &RecoverConfig, out_dir: &Path) -> CliResult<RecoveryReport> {
    if cfg.k_nonzero > cfg.d || cfg.repeats == 0 {
        return Err(CliError::usage(
            "recover config needs k_nonzero <= d and repeats >= 1",
        ));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;

    let mut errors = Vec::with_capacity(cfg.repeats);
    let mut first_pair: Option<(Vec<f64>, Vec<f64>)> = None;
    for rep in 0..cfg.repeats {
        let (err, w_hat, w_true) = run_single(cfg, rep)?;
        log::info!("recovery repeat {rep}: relative error {err:.4}");
        errors.push(err);
        if first_pair.is_none() {
            first_pair = Some((w_hat, w_true));
        }
    }

    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
        / errors.len() as f64)
        .sqrt();
    let report = RecoveryReport {
        tool_version: TOOL_VERSION.into(),
        n: cfg.n,
        d: cfg.d,
        k_nonzero: cfg.k_nonzero,
        noise_std: cfg.noise_std,
        epochs: cfg.train.epochs,
        seed: cfg.seed,
        errors,
        mean_error: mean,
        std_error: std,
    };

    std::fs::write(
        out_dir.join("recovery.json"),
        serde_json::to_string_pretty(&report).expect("serializable") + "\n",
    )
    .map_err(|e| CliError::runtime(format!("cannot write recovery.json: {e}")))?;

    let (w_hat, w_true) = first_pair.expect("at least one repeat");
    let mut csv = String::from("index,w_true,w_hat\n");
    for (i, (t, h)) in w_true.iter().zip(&w_hat).enumerate() {
        csv.push_str(&format!("{i},{t},{h}\n"));
    }
    std::fs::write(out_dir.join("signal_reconstruction.csv"), csv)
        .map_err(|e| CliError::runtime(format!("cannot write reconstruction csv: {e}")))?;

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_of_truth_is_zero() {
        let w = vec![0.0, -1.5, 2.0, 0.0];
        assert_eq!(relative_error(&w, &w), 0.0);
    }

    #[test]
    fn relative_error_scales() {
        let truth = vec![3.0, 4.0];
        let est = vec![0.0, 0.0];
        assert!((relative_error(&est, &truth) - 1.0).abs() < 1e-15);
    }
}
