//! K-fold cross-validation benchmark: preprocess → train → evaluate per fold,
//! aggregate metrics, and emit machine-readable artifacts.

use std::io::Write;
use std::path::Path;

use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use hsbnn_core::data::{kfold, preprocess, Dataset};
use hsbnn_core::metrics::{self, ConfusionMatrix, MetricSummary};
use hsbnn_core::models::{
    init_model, predict_batch, save_checkpoint, ModelKind, ModelSpec, Task, VariationalModel,
};
use hsbnn_core::training::{train, TrainHistory};

use crate::config::RunConfig;
use crate::{derive_seed, CliError, CliResult, TOOL_VERSION};

#[derive(Debug, Serialize)]
pub struct NamedMetric {
    pub name: String,
    #[serde(flatten)]
    pub summary: MetricSummary,
}

#[derive(Debug, Serialize)]
pub struct ModelResult {
    pub model: String,
    pub task: Task,
    pub metrics: Vec<NamedMetric>,
    /// Summed over folds; classification only.
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip)]
    pub per_fold_confusion: Vec<ConfusionMatrix>,
    #[serde(skip)]
    pub full_model: Option<VariationalModel>,
    #[serde(skip)]
    pub full_history: Option<TrainHistory>,
}

impl ModelResult {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name).map(|m| &m.summary)
    }
}

#[derive(Debug, Serialize)]
pub struct BenchResult {
    pub tool_version: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub cv_folds: usize,
    pub seed: u64,
    pub models: Vec<ModelResult>,
}

struct FoldPrediction {
    model: String,
    fold: usize,
    row: usize,
    y_true: f64,
    pred_mean: f64,
    pred_std: f64,
}

pub fn model_spec_for(cfg: &RunConfig, kind: ModelKind, task: Task, d: usize) -> ModelSpec {
    ModelSpec {
        kind,
        task,
        n_features: d,
        n_hidden: if kind.is_bnn() { cfg.n_hidden } else { 0 },
        b0: cfg.b0,
        bg: cfg.bg,
        sigma_prior: cfg.sigma_prior,
    }
}

/// Runs the full cross-validated benchmark and writes artifacts to `out_dir`.
pub fn run(cfg: &RunConfig, raw_ds: &Dataset, out_dir: &Path) -> CliResult<BenchResult> {
    cfg.validate()?;
    let task = raw_ds.schema.target.task;
    let n = raw_ds.n();
    let d = raw_ds.d();
    let plan = kfold(n, cfg.cv_folds, derive_seed(cfg.seed, "kfold"))?;

    let mut results = Vec::new();
    let mut predictions: Vec<FoldPrediction> = Vec::new();

    for &kind in &cfg.models {
        log::info!("benchmarking {} on {} ({n} rows)", kind.name(), cfg.dataset.label());
        let spec = model_spec_for(cfg, kind, task, d);

        let mut fold_rmse = Vec::new();
        let mut fold_nll = Vec::new();
        let mut fold_err = Vec::new();
        let mut fold_auroc = Vec::new();
        let mut per_fold_confusion = Vec::new();

        for fold in 0..plan.k {
            let train_idx = plan.train_indices(fold);
            let test_idx = plan.test_indices(fold);
            let prepped = preprocess(raw_ds, &train_idx)?;
            let stats = prepped.stats.as_ref().expect("preprocess sets stats");

            let x_train = prepped.x.select(Axis(0), &train_idx);
            let y_train = prepped.y.select(Axis(0), &train_idx);
            let x_test = prepped.x.select(Axis(0), test_idx);
            let y_test_std = prepped.y.select(Axis(0), test_idx);

            let fold_seed = derive_seed(cfg.seed, &format!("{}-fold{fold}", kind.name()));
            let model = init_model(spec, fold_seed)?;
            let mut train_cfg = cfg.train;
            train_cfg.seed = derive_seed(fold_seed, "train");
            let (trained, _history) = train(&model, x_train.view(), y_train.view(), &train_cfg)
                .map_err(|e| {
                    CliError::runtime(format!(
                        "training {} fold {fold} aborted: {e}",
                        kind.name()
                    ))
                })?;

            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(fold_seed, "eval"));
            let preds =
                predict_batch(&trained, x_test.view(), cfg.train.test_mc_samples, &mut rng)?;

            match task {
                Task::Regression => {
                    let pred_orig: Vec<f64> = preds
                        .iter()
                        .map(|p| stats.destandardize_target(p.mean))
                        .collect();
                    let truth_orig: Vec<f64> =
                        test_idx.iter().map(|&i| raw_ds.y[i]).collect();
                    fold_rmse.push(metrics::rmse(&pred_orig, &truth_orig)?);
                    let nll = metrics::nll(
                        &trained,
                        x_test.view(),
                        y_test_std.view(),
                        stats.target_std,
                        cfg.train.test_mc_samples,
                        &mut rng,
                    )?;
                    fold_nll.push(nll);
                    for (k, &i) in test_idx.iter().enumerate() {
                        predictions.push(FoldPrediction {
                            model: kind.name().into(),
                            fold,
                            row: i,
                            y_true: raw_ds.y[i],
                            pred_mean: pred_orig[k],
                            pred_std: preds[k].std * stats.target_std.unwrap_or(1.0),
                        });
                    }
                }
                Task::Classification => {
                    let probs: Vec<f64> = preds.iter().map(|p| p.mean).collect();
                    let labels: Vec<f64> = test_idx.iter().map(|&i| raw_ds.y[i]).collect();
                    fold_err.push(metrics::error_rate(&probs, &labels));
                    fold_auroc.push(metrics::auroc(&probs, &labels)?);
                    fold_nll.push(metrics::nll(
                        &trained,
                        x_test.view(),
                        y_test_std.view(),
                        None,
                        cfg.train.test_mc_samples,
                        &mut rng,
                    )?);
                    per_fold_confusion.push(metrics::confusion(&probs, &labels));
                    for (k, &i) in test_idx.iter().enumerate() {
                        predictions.push(FoldPrediction {
                            model: kind.name().into(),
                            fold,
                            row: i,
                            y_true: raw_ds.y[i],
                            pred_mean: probs[k],
                            pred_std: preds[k].std,
                        });
                    }
                }
            }
        }

        let mut summaries = Vec::new();
        let mut push = |name: &str, values: &[f64]| -> CliResult<()> {
            summaries.push(NamedMetric {
                name: name.into(),
                summary: metrics::aggregate(values)?,
            });
            Ok(())
        };
        match task {
            Task::Regression => {
                push("rmse", &fold_rmse)?;
                push("nll", &fold_nll)?;
            }
            Task::Classification => {
                push("error_rate", &fold_err)?;
                push("auroc", &fold_auroc)?;
                push("nll", &fold_nll)?;
            }
        }
        let confusion = if per_fold_confusion.is_empty() {
            None
        } else {
            let mut total = ConfusionMatrix::default();
            for cm in &per_fold_confusion {
                total.add(cm);
            }
            Some(total)
        };

        // Full-data model for checkpointing and later relevance reports.
        let (full_model, full_history) = if cfg.save_checkpoints {
            let all: Vec<usize> = (0..n).collect();
            let prepped = preprocess(raw_ds, &all)?;
            let full_seed = derive_seed(cfg.seed, &format!("{}-full", kind.name()));
            let model = init_model(spec, full_seed)?;
            let mut train_cfg = cfg.train;
            train_cfg.seed = derive_seed(full_seed, "train");
            let (trained, history) =
                train(&model, prepped.x.view(), prepped.y.view(), &train_cfg).map_err(|e| {
                    CliError::runtime(format!(
                        "full-data training of {} aborted: {e}",
                        kind.name()
                    ))
                })?;
            (Some(trained), Some(history))
        } else {
            (None, None)
        };

        results.push(ModelResult {
            model: kind.name().into(),
            task,
            metrics: summaries,
            confusion,
            per_fold_confusion,
            full_model,
            full_history,
        });
    }

    let result = BenchResult {
        tool_version: TOOL_VERSION.into(),
        dataset: cfg.dataset.label(),
        n,
        d,
        cv_folds: cfg.cv_folds,
        seed: cfg.seed,
        models: results,
    };
    write_artifacts(&result, &predictions, out_dir)?;
    Ok(result)
}

fn write_artifacts(
    result: &BenchResult,
    predictions: &[FoldPrediction],
    out_dir: &Path,
) -> CliResult<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let write = |name: &str, content: String| -> CliResult<()> {
        std::fs::write(out_dir.join(name), content)
            .map_err(|e| CliError::runtime(format!("cannot write {name}: {e}")))
    };

    write(
        "metrics.json",
        serde_json::to_string_pretty(result).expect("serializable") + "\n",
    )?;

    // metrics.csv: one row per model × metric with per-fold columns.
    let k = result.cv_folds;
    let mut csv = String::from("model,metric,mean,standard_error");
    for i in 0..k {
        csv.push_str(&format!(",fold_{i}"));
    }
    csv.push('\n');
    for m in &result.models {
        for nm in &m.metrics {
            let s = &nm.summary;
            csv.push_str(&format!("{},{},{},{}", m.model, nm.name, s.mean, s.standard_error));
            for v in &s.per_fold {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
    }
    write("metrics.csv", csv)?;

    if result.models.iter().any(|m| m.confusion.is_some()) {
        #[derive(Serialize)]
        struct ConfusionEntry<'a> {
            model: &'a str,
            total: &'a ConfusionMatrix,
            per_fold: &'a [ConfusionMatrix],
        }
        let entries: Vec<ConfusionEntry> = result
            .models
            .iter()
            .filter_map(|m| {
                m.confusion.as_ref().map(|total| ConfusionEntry {
                    model: &m.model,
                    total,
                    per_fold: &m.per_fold_confusion,
                })
            })
            .collect();
        write(
            "confusion.json",
            serde_json::to_string_pretty(&entries).expect("serializable") + "\n",
        )?;
    }

    let mut pred_csv = String::from("model,fold,row,y_true,pred_mean,pred_std\n");
    for p in predictions {
        pred_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.model, p.fold, p.row, p.y_true, p.pred_mean, p.pred_std
        ));
    }
    write("predictions.csv", pred_csv)?;

    for m in &result.models {
        if let Some(model) = &m.full_model {
            save_checkpoint(model, &out_dir.join(format!("checkpoint_{}.json", m.model)))?;
        }
        if let Some(history) = &m.full_history {
            let mut f = std::fs::File::create(out_dir.join(format!("history_{}.csv", m.model)))
                .map_err(|e| CliError::runtime(format!("cannot write history: {e}")))?;
            writeln!(f, "epoch,elbo").map_err(|e| CliError::runtime(e.to_string()))?;
            for (epoch, elbo) in history.elbo.iter().enumerate() {
                writeln!(f, "{epoch},{elbo}").map_err(|e| CliError::runtime(e.to_string()))?;
            }
        }
    }
    Ok(())
}
