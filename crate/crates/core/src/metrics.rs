//! Evaluation metrics and cross-validation aggregation.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::special::log_mean_exp;
use crate::error::{Error, Result};
use crate::models::{sample_weights, Task, VariationalModel};
use crate::training::PROB_CLAMP;

/// Per-fold values with their mean and standard error (std/√k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub standard_error: f64,
}

/// Aggregates per-fold metric values; requires at least two folds.
pub fn aggregate(values: &[f64]) -> Result<MetricSummary> {
    if values.len() < 2 {
        return Err(Error::Degenerate(
            "aggregation needs at least two folds".into(),
        ));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(MetricSummary {
        per_fold: values.to_vec(),
        mean,
        standard_error: (var / k).sqrt(),
    })
}

/// Root mean squared error in the units of its inputs.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "rmse needs equal non-empty slices, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mse = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Fraction of points where thresholding the probability at 0.5 disagrees
/// with the label.
pub fn error_rate(probs: &[f64], labels: &[f64]) -> f64 {
    assert_eq!(probs.len(), labels.len());
    let wrong = probs
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.5) != (**y >= 0.5))
        .count();
    wrong as f64 / probs.len() as f64
}

/// Area under the ROC curve via the rank-sum (Mann–Whitney) statistic with
/// mid-ranks for ties: P(score⁺ > score⁻) + ½ P(tie).
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|y| **y >= 0.5).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Mid-ranks over tie groups, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] >= 0.5 {
                rank_sum_pos += mid_rank;
            }
        }
        i = j + 1;
    }

    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Counts at the fixed 0.5 decision threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fneg: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fneg
    }

    pub fn error_rate(&self) -> f64 {
        (self.fp + self.fneg) as f64 / self.total() as f64
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fneg += other.fneg;
    }
}

pub fn confusion(probs: &[f64], labels: &[f64]) -> ConfusionMatrix {
    assert_eq!(probs.len(), labels.len());
    let mut cm = ConfusionMatrix::default();
    for (p, y) in probs.iter().zip(labels) {
        match (*p >= 0.5, *y >= 0.5) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fneg += 1,
            (false, false) => cm.tn += 1,
        }
    }
    cm
}

/// Mean per-point negative log predictive density over `s` weight draws.
///
/// Classification: −ln of the mean sampled probability of the true class.
/// Regression: −ln of the equal-weight Gaussian mixture over samples,
/// evaluated by log-mean-exp, plus ln(target_std) when predictions live in
/// standardized units so the value lands in original units.
pub fn nll<R: Rng + ?Sized>(
    model: &VariationalModel,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    target_std: Option<f64>,
    s: usize,
    rng: &mut R,
) -> Result<f64> {
    assert!(s >= 1, "nll needs at least one sample");
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::shape("nll needs a non-empty aligned test set"));
    }
    let n = x.nrows();
    let mut raw_samples = Vec::with_capacity(s);
    for _ in 0..s {
        let w = sample_weights(model, rng);
        raw_samples.push(model.raw_output(&w, x));
    }

    let total = match model.spec.task {
        Task::Classification => {
            let mut acc = 0.0;
            for i in 0..n {
                let p_mean = raw_samples
                    .iter()
                    .map(|r| crate::distributions::special::sigmoid(r[i]))
                    .sum::<f64>()
                    / s as f64;
                let p = p_mean.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                acc -= if y[i] >= 0.5 { p.ln() } else { (1.0 - p).ln() };
            }
            acc
        }
        Task::Regression => {
            let sigma = model.obs_log_sigma.exp();
            let ln_norm = -(sigma.ln()) - 0.5 * (2.0 * std::f64::consts::PI).ln();
            let destd = target_std.map(|t| t.ln()).unwrap_or(0.0);
            let mut point_lls = vec![0.0; s];
            let mut acc = 0.0;
            for i in 0..n {
                for (k, r) in raw_samples.iter().enumerate() {
                    let z = (y[i] - r[i]) / sigma;
                    point_lls[k] = ln_norm - 0.5 * z * z;
                }
                acc -= log_mean_exp(&point_lls) - destd;
            }
            acc
        }
    };
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{init_model, LayerQ, ModelKind, ModelSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rmse_cases() {
        assert_abs_diff_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            rmse(&[1.0, 2.0], &[1.0, 4.0]).unwrap(),
            2.0_f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn error_rate_cases() {
        assert_eq!(error_rate(&[0.9, 0.1], &[1.0, 0.0]), 0.0);
        assert_eq!(error_rate(&[0.6, 0.4], &[0.0, 1.0]), 1.0);
        // Majority-class predictor on a 86.5/13.5 split errs on the minority.
        let n = 1000;
        let labels: Vec<f64> = (0..n).map(|i| if i < 135 { 1.0 } else { 0.0 }).collect();
        let probs = vec![0.0; n];
        assert_abs_diff_eq!(error_rate(&probs, &labels), 0.135, epsilon = 1e-12);
    }

    #[test]
    fn auroc_cases() {
        assert_abs_diff_eq!(
            auroc(&[0.9, 0.8, 0.2, 0.1], &[1.0, 1.0, 0.0, 0.0]).unwrap(),
            1.0
        );
        assert_abs_diff_eq!(
            auroc(&[0.5, 0.5, 0.5, 0.5], &[1.0, 0.0, 1.0, 0.0]).unwrap(),
            0.5
        );
        // Brute force over the 4 positive–negative pairs gives 3/4.
        assert_abs_diff_eq!(
            auroc(&[0.9, 0.8, 0.3, 0.2], &[1.0, 0.0, 1.0, 0.0]).unwrap(),
            0.75
        );
        assert!(auroc(&[0.1, 0.9], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn confusion_cases() {
        let cm = confusion(&[0.9, 0.8], &[1.0, 1.0]);
        assert_eq!((cm.tp, cm.fp, cm.fneg, cm.tn), (2, 0, 0, 0));
        let cm = confusion(&[0.6], &[0.0]);
        assert_eq!(cm.fp, 1);
        let cm = confusion(&[0.6, 0.4, 0.5, 0.1], &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(cm.total(), 4);
        assert_abs_diff_eq!(cm.error_rate(), 0.5);
    }

    #[test]
    fn aggregate_cases() {
        let s = aggregate(&[2.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s.standard_error, 0.0);
        let s = aggregate(&[1.0, 3.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 2.0);
        assert_abs_diff_eq!(s.standard_error, 1.0, epsilon = 1e-12);
        let s = aggregate(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 2.5);
        assert_abs_diff_eq!(s.standard_error, 0.645_497_224_4, epsilon = 1e-9);
        assert!(aggregate(&[1.0]).is_err());
    }

    fn pinned_linear(task: Task) -> VariationalModel {
        let mut m = init_model(
            ModelSpec {
                kind: ModelKind::LinearGaussian,
                task,
                n_features: 1,
                n_hidden: 0,
                b0: 1.0,
                bg: 1.0,
                sigma_prior: 1.0,
            },
            0,
        )
        .unwrap();
        if let LayerQ::Gaussian(l) = &mut m.layers[0] {
            l.weight_mu.fill(0.0);
            l.bias_mu.fill(0.0);
            l.weight_rho.fill(crate::distributions::special::softplus_inv(1e-12));
            l.bias_rho.fill(crate::distributions::special::softplus_inv(1e-12));
        }
        m
    }

    #[test]
    fn nll_classification_cases() {
        // Probability 0.5 everywhere → NLL = ln 2.
        let mut m = pinned_linear(Task::Classification);
        let x = array![[0.3], [-0.4]];
        let y = array![1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = nll(&m, x.view(), y.view(), None, 20, &mut rng).unwrap();
        assert_abs_diff_eq!(v, 2.0_f64.ln(), epsilon = 1e-9);

        // A confidently correct classifier is bounded by the clamp.
        if let LayerQ::Gaussian(l) = &mut m.layers[0] {
            l.bias_mu.fill(60.0);
        }
        let y = array![1.0, 1.0];
        let v = nll(&m, x.view(), y.view(), None, 20, &mut rng).unwrap();
        assert!(v >= 0.0 && v < 1e-6, "clamped NLL, got {v}");
    }

    #[test]
    fn nll_regression_single_sample() {
        // One point, f = y, σ_obs = 1 → ½ ln(2π).
        let mut m = pinned_linear(Task::Regression);
        m.obs_log_sigma = 0.0;
        let x = array![[0.0]];
        let y = array![0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = nll(&m, x.view(), y.view(), None, 1, &mut rng).unwrap();
        assert_abs_diff_eq!(v, 0.918_938_533_204_672_7, epsilon = 1e-9);
        // De-standardization adds ln(std_y).
        let v2 = nll(&m, x.view(), y.view(), Some(2.0), 1, &mut rng).unwrap();
        assert_abs_diff_eq!(v2, v + 2.0_f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn rmse_shuffle_invariant() {
        let pred = [1.0, 2.5, -0.3, 4.0];
        let truth = [0.5, 2.0, 0.0, 5.0];
        let a = rmse(&pred, &truth).unwrap();
        let pred_r = [4.0, -0.3, 2.5, 1.0];
        let truth_r = [5.0, 0.0, 2.0, 0.5];
        let b = rmse(&pred_r, &truth_r).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
}
