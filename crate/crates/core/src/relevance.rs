//! Feature-selection analysis of a trained model: per-feature weight scores,
//! log-binned histograms, gap thresholds, and scale-mode diagnostics.
//!
//! A shrunk feature shows up as a score orders of magnitude below the active
//! group, so the histogram of log scores splits into two clusters and the
//! largest log-gap is a natural relevance threshold.

use serde::{Deserialize, Serialize};

use crate::distributions::lognormal_stats;
use crate::error::{Error, Result};
use crate::models::{first_layer_posterior_mean, LayerQ, VariationalModel};

/// Mean absolute posterior-mean first-layer weight per feature.
///
/// For linear kinds this is the magnitude of the single weight attached to
/// each feature; for BNNs it averages over the outgoing weights to all hidden
/// units. Horseshoe posterior means fold in E[v]·E[τ_j].
pub fn feature_scores(model: &VariationalModel) -> Vec<f64> {
    let means = first_layer_posterior_mean(model);
    let rows = means.nrows() as f64;
    (0..means.ncols())
        .map(|j| means.column(j).iter().map(|w| w.abs()).sum::<f64>() / rows)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

/// Geometric-bin histogram; zero scores land in a dedicated underflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<HistBin>,
}

pub fn log_histogram(scores: &[f64], n_bins: usize) -> Result<Histogram> {
    assert!(n_bins >= 1);
    let positive: Vec<f64> = scores.iter().cloned().filter(|s| *s > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::Degenerate(
            "all scores are zero; histogram undefined".into(),
        ));
    }
    let lo = positive.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let zeros = scores.len() - positive.len();

    let mut bins = Vec::new();
    if zeros > 0 {
        bins.push(HistBin { bin_lo: 0.0, bin_hi: lo, count: zeros });
    }
    if lo == hi {
        bins.push(HistBin { bin_lo: lo, bin_hi: hi, count: positive.len() });
        return Ok(Histogram { bins });
    }

    let ratio = (hi / lo).powf(1.0 / n_bins as f64);
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo * ratio.powi(i as i32)).collect();
    let mut counts = vec![0usize; n_bins];
    for &s in &positive {
        // The top edge closes the last bin.
        let mut idx = ((s / lo).ln() / ratio.ln()).floor() as usize;
        if idx >= n_bins {
            idx = n_bins - 1;
        }
        counts[idx] += 1;
    }
    for i in 0..n_bins {
        bins.push(HistBin { bin_lo: edges[i], bin_hi: edges[i + 1], count: counts[i] });
    }
    Ok(Histogram { bins })
}

/// Geometric midpoint of the largest gap between consecutive distinct
/// positive scores in log space. Ties go to the gap with the smaller index
/// (the lower end of the score range).
pub fn gap_threshold(scores: &[f64]) -> Result<f64> {
    let mut distinct: Vec<f64> = scores.iter().cloned().filter(|s| *s > 0.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(
            "gap threshold needs at least two distinct positive scores".into(),
        ));
    }
    let mut best_gap = f64::NEG_INFINITY;
    let mut best = 0usize;
    for i in 0..distinct.len() - 1 {
        let gap = (distinct[i + 1] / distinct[i]).ln();
        if gap > best_gap {
            best_gap = gap;
            best = i;
        }
    }
    Ok((distinct[best] * distinct[best + 1]).sqrt())
}

/// Mode of the log-normal posterior of v·τ_j for every feature j:
/// exp(μ_v + μ_τj − σ_v² − σ_τj²).
pub fn scale_modes(model: &VariationalModel) -> Result<Vec<f64>> {
    match &model.layers[0] {
        LayerQ::Horseshoe(l) => Ok((0..l.n_features())
            .map(|j| {
                lognormal_stats(l.scale_product_params(j))
                    .expect("positive posterior scale")
                    .mode
            })
            .collect()),
        LayerQ::Gaussian(_) => Err(Error::UnsupportedModel(
            "scale modes require a horseshoe first layer".into(),
        )),
    }
}

/// How the relevance threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RelevanceMethod {
    /// Largest log-gap in the weight scores.
    Gap,
    /// Threshold on the modes of the v·τ_j posteriors; with no explicit
    /// threshold the gap rule is applied to the modes.
    ScaleMode { threshold: Option<f64> },
    /// Fixed threshold on the weight scores.
    Fixed { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRelevance {
    pub name: String,
    pub score: f64,
    pub scale_mode: Option<f64>,
    pub relevant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub method: RelevanceMethod,
    pub threshold: f64,
    pub features: Vec<FeatureRelevance>,
    pub histogram: Histogram,
}

impl RelevanceReport {
    pub fn relevant_names(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| f.relevant)
            .map(|f| f.name.as_str())
            .collect()
    }
}

pub const DEFAULT_HIST_BINS: usize = 12;

/// Assembles scores, histogram, threshold, and relevance flags. `names` must
/// list one feature name per model input, in order.
pub fn relevance_report(
    model: &VariationalModel,
    names: &[String],
    method: RelevanceMethod,
) -> Result<RelevanceReport> {
    if names.len() != model.spec.n_features {
        return Err(Error::shape(format!(
            "{} names supplied for {} model features",
            names.len(),
            model.spec.n_features
        )));
    }
    let scores = feature_scores(model);
    let modes = scale_modes(model).ok();
    let histogram = log_histogram(&scores, DEFAULT_HIST_BINS)?;

    let (threshold, flags): (f64, Vec<bool>) = match method {
        RelevanceMethod::Gap => {
            let t = gap_threshold(&scores)?;
            (t, scores.iter().map(|s| *s > t).collect())
        }
        RelevanceMethod::ScaleMode { threshold } => {
            let m = modes.as_ref().ok_or_else(|| {
                Error::UnsupportedModel("scale_mode method requires a horseshoe model".into())
            })?;
            let t = match threshold {
                Some(t) => t,
                None => gap_threshold(m)?,
            };
            (t, m.iter().map(|v| *v > t).collect())
        }
        RelevanceMethod::Fixed { threshold } => {
            (threshold, scores.iter().map(|s| *s > threshold).collect())
        }
    };

    let features = names
        .iter()
        .zip(scores.iter())
        .zip(flags.iter())
        .enumerate()
        .map(|(j, ((name, score), relevant))| FeatureRelevance {
            name: name.clone(),
            score: *score,
            scale_mode: modes.as_ref().map(|m| m[j]),
            relevant: *relevant,
        })
        .collect();

    Ok(RelevanceReport { method, threshold, features, histogram })
}
