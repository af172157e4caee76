//! CSV ingestion, schema-driven preprocessing, k-fold plans, and synthetic
//! dataset generators.
//!
//! Preprocessing follows a strict train-split discipline: range filtering
//! marks out-of-range cells missing, imputation and standardization
//! statistics come from the training rows only, and the statistics are
//! retained so regression predictions can be mapped back to original units.
//! Missing cells are carried as NaN until imputation removes them.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Ordinal,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Imputation {
    Mean,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Valid range as [min, max]; either bound may be null for open-ended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[Option<f64>; 2]>,
    /// Whether the min bound itself counts as invalid (e.g. "> 0").
    #[serde(default)]
    pub min_exclusive: bool,
    #[serde(default)]
    pub max_exclusive: bool,
    /// Defaults to zero-imputation for binary features, mean otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impute: Option<Imputation>,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            range: None,
            min_exclusive: false,
            max_exclusive: false,
            impute: None,
        }
    }

    pub fn effective_impute(&self) -> Imputation {
        self.impute.unwrap_or(match self.kind {
            FeatureKind::Binary => Imputation::Zero,
            _ => Imputation::Mean,
        })
    }

    fn in_range(&self, v: f64) -> bool {
        let Some([min, max]) = self.range else {
            return true;
        };
        if let Some(lo) = min {
            if v < lo || (self.min_exclusive && v == lo) {
                return false;
            }
        }
        if let Some(hi) = max {
            if v > hi || (self.max_exclusive && v == hi) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
    pub target: TargetSpec,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        names.push(&self.target.name);
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(Error::Schema("duplicate column names in schema".into()));
        }
        for f in &self.features {
            if let Some([Some(lo), Some(hi)]) = f.range {
                if lo > hi {
                    return Err(Error::Schema(format!(
                        "feature '{}' has range min {lo} > max {hi}",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let schema: Schema =
            serde_json::from_str(&raw).map_err(|e| Error::Schema(format!("{path:?}: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json_file(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("schema serializes");
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// Standardization statistics captured from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Which columns were actually shifted/scaled.
    pub standardized: Vec<bool>,
    /// Present for regression targets.
    pub target_mean: Option<f64>,
    pub target_std: Option<f64>,
}

impl Standardization {
    /// Maps a standardized prediction back to original target units.
    pub fn destandardize_target(&self, v: f64) -> f64 {
        match (self.target_mean, self.target_std) {
            (Some(m), Some(s)) => m + s * v,
            _ => v,
        }
    }
}

/// Feature matrix, targets, schema, and (after preprocessing) the train-split
/// statistics. Missing values are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub schema: Schema,
    pub stats: Option<Standardization>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_missing(&self) -> usize {
        self.x.iter().filter(|v| v.is_nan()).count()
    }
}

/// Parses a comma-separated, header-row CSV against the schema. Cells that
/// are empty or non-numeric become missing markers; target cells must parse.
pub fn load_csv(path: &std::path::Path, schema: &Schema) -> Result<Dataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{path:?}: {e}")))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{path:?}: {e}")))?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let col_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in {path:?}")))
    };
    let feature_cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| col_of(&f.name))
        .collect::<Result<_>>()?;
    let target_col = col_of(&schema.target.name)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{path:?} row {}: {e}", i + 1)))?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let row: Vec<f64> = feature_cols
            .iter()
            .map(|&c| cell(c).parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        let target = cell(target_col).parse::<f64>().map_err(|_| {
            Error::Parse(format!(
                "{path:?} row {}: target '{}' is not numeric",
                i + 1,
                cell(target_col)
            ))
        })?;
        rows.push(row);
        targets.push(target);
    }

    let n = rows.len();
    let d = schema.features.len();
    let mut x = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }
    Ok(Dataset {
        x,
        y: Array1::from_vec(targets),
        schema: schema.clone(),
        stats: None,
    })
}

const MIN_STD: f64 = 1e-12;

/// Range-filters, imputes, and standardizes using statistics from
/// `train_idx` only. Returns the full preprocessed dataset; slicing into
/// train/test happens afterwards.
pub fn preprocess(ds: &Dataset, train_idx: &[usize]) -> Result<Dataset> {
    if train_idx.is_empty() {
        return Err(Error::Degenerate("preprocess needs a non-empty train split".into()));
    }
    let n = ds.n();
    let d = ds.d();
    let mut x = ds.x.clone();

    // Out-of-range values become missing before any statistics are taken.
    for (j, f) in ds.schema.features.iter().enumerate() {
        if f.range.is_some() {
            for i in 0..n {
                let v = x[[i, j]];
                if !v.is_nan() && !f.in_range(v) {
                    x[[i, j]] = f64::NAN;
                }
            }
        }
    }

    let mut feature_mean = vec![0.0; d];
    let mut feature_std = vec![1.0; d];
    let mut standardized = vec![false; d];
    for (j, f) in ds.schema.features.iter().enumerate() {
        let impute_value = match f.effective_impute() {
            Imputation::Zero => 0.0,
            Imputation::Mean => {
                let (mut sum, mut count) = (0.0, 0usize);
                for &i in train_idx {
                    let v = x[[i, j]];
                    if !v.is_nan() {
                        sum += v;
                        count += 1;
                    }
                }
                if count == 0 {
                    log::warn!(
                        "feature '{}' has no valid training values; imputing 0",
                        f.name
                    );
                    0.0
                } else {
                    sum / count as f64
                }
            }
        };
        for i in 0..n {
            if x[[i, j]].is_nan() {
                x[[i, j]] = impute_value;
            }
        }

        if f.kind == FeatureKind::Continuous {
            let mean =
                train_idx.iter().map(|&i| x[[i, j]]).sum::<f64>() / train_idx.len() as f64;
            let var = train_idx
                .iter()
                .map(|&i| (x[[i, j]] - mean).powi(2))
                .sum::<f64>()
                / train_idx.len() as f64;
            let mut std = var.sqrt();
            if std < MIN_STD {
                log::warn!(
                    "feature '{}' has zero variance on the training split; std forced to 1",
                    f.name
                );
                std = 1.0;
            }
            for i in 0..n {
                x[[i, j]] = (x[[i, j]] - mean) / std;
            }
            feature_mean[j] = mean;
            feature_std[j] = std;
            standardized[j] = true;
        }
    }

    let mut y = ds.y.clone();
    let (target_mean, target_std) = if ds.schema.target.task == Task::Regression {
        let mean = train_idx.iter().map(|&i| y[i]).sum::<f64>() / train_idx.len() as f64;
        let var = train_idx
            .iter()
            .map(|&i| (y[i] - mean).powi(2))
            .sum::<f64>()
            / train_idx.len() as f64;
        let mut std = var.sqrt();
        if std < MIN_STD {
            log::warn!("target has zero variance on the training split; std forced to 1");
            std = 1.0;
        }
        y.mapv_inplace(|v| (v - mean) / std);
        (Some(mean), Some(std))
    } else {
        (None, None)
    };

    Ok(Dataset {
        x,
        y,
        schema: ds.schema.clone(),
        stats: Some(Standardization {
            feature_mean,
            feature_std,
            standardized,
            target_mean,
            target_std,
        }),
    })
}

/// K disjoint test sets covering [0, n), shuffled deterministically per seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    test_sets: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.test_sets[fold]
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut in_test = vec![false; self.n_total()];
        for &i in &self.test_sets[fold] {
            in_test[i] = true;
        }
        (0..in_test.len()).filter(|&i| !in_test[i]).collect()
    }

    pub fn n_total(&self) -> usize {
        self.test_sets.iter().map(|t| t.len()).sum()
    }
}

pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::domain(format!(
            "kfold needs 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut test_sets = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        test_sets.push(indices[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldPlan { k, seed, test_sets })
}

fn synth_schema(d: usize, task: Task) -> Schema {
    Schema {
        features: (0..d).map(|j| FeatureSpec::continuous(format!("x{j}"))).collect(),
        target: TargetSpec { name: "y".into(), task },
    }
}

/// Sparse linear recovery problem: rows of X are standard Gaussians
/// normalized to the unit sphere, the true weight vector has `k_nonzero`
/// standard-normal entries at random positions, and y = Xw + ε.
pub fn synth_sparse_linear(
    n: usize,
    d: usize,
    k_nonzero: usize,
    noise_std: f64,
    seed: u64,
) -> (Dataset, Array1<f64>) {
    assert!(k_nonzero <= d, "cannot place {k_nonzero} nonzeros in {d} slots");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::from_shape_fn((n, d), |_| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    for mut row in x.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.mapv_inplace(|v| v / norm);
    }

    let mut positions: Vec<usize> = (0..d).collect();
    positions.shuffle(&mut rng);
    let mut w = Array1::zeros(d);
    for &p in positions.iter().take(k_nonzero) {
        w[p] = rng.sample::<f64, _>(rand_distr::StandardNormal);
    }

    let mut y = x.dot(&w);
    if noise_std > 0.0 {
        for v in y.iter_mut() {
            *v += noise_std * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
    }

    (
        Dataset { x, y, schema: synth_schema(d, Task::Regression), stats: None },
        w,
    )
}

/// Binary classification where the label depends nonlinearly on the first
/// `d_relevant` features only; the remaining `d_noise` columns are
/// independent noise. The score is a sum of per-feature tanh ridges (random
/// sign and gain, so every relevant feature has a guaranteed effect) plus
/// mild pairwise tanh interactions. Labels threshold the score at its
/// median, so classes are balanced by construction.
pub fn synth_relevance_classification(
    n: usize,
    d_relevant: usize,
    d_noise: usize,
    seed: u64,
) -> (Dataset, Vec<bool>) {
    assert!(n >= 100, "relevance generator needs n >= 100");
    assert!(d_relevant >= 1);
    let d = d_relevant + d_noise;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });

    let signs: Vec<f64> = (0..d_relevant)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let gains: Vec<f64> = (0..d_relevant)
        .map(|_| 0.8 + 0.8 * rng.random::<f64>())
        .collect();
    let mut pair_pool: Vec<usize> = (0..d_relevant).collect();
    pair_pool.shuffle(&mut rng);
    let pairs: Vec<(usize, usize, f64)> = pair_pool
        .chunks_exact(2)
        .map(|c| (c[0], c[1], if rng.random::<bool>() { 1.0 } else { -1.0 }))
        .collect();

    let scores: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|row| {
            let additive: f64 = (0..d_relevant)
                .map(|j| signs[j] * (gains[j] * row[j]).tanh())
                .sum();
            let interaction: f64 = pairs
                .iter()
                .map(|&(p, q, t)| t * (row[p] * row[q]).tanh())
                .sum();
            additive + 0.5 * interaction
        })
        .collect();
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[n / 2];
    let y = Array1::from_iter(scores.iter().map(|&s| f64::from(u8::from(s > median))));

    let mask: Vec<bool> = (0..d).map(|j| j < d_relevant).collect();
    (
        Dataset { x, y, schema: synth_schema(d, Task::Classification), stats: None },
        mask,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn toy_schema() -> Schema {
        Schema {
            features: vec![
                FeatureSpec {
                    name: "a".into(),
                    kind: FeatureKind::Continuous,
                    range: Some([Some(0.0), Some(250.0)]),
                    min_exclusive: false,
                    max_exclusive: false,
                    impute: Some(Imputation::Mean),
                },
                FeatureSpec {
                    name: "b".into(),
                    kind: FeatureKind::Binary,
                    range: None,
                    min_exclusive: false,
                    max_exclusive: false,
                    impute: Some(Imputation::Zero),
                },
            ],
            target: TargetSpec { name: "y".into(), task: Task::Regression },
        }
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn load_csv_missing_cells_and_counts() {
        let f = write_csv("a,b,y\n1.0,0,2.0\n,1,3.0\n5.0,zzz,4.0\n");
        let ds = load_csv(f.path(), &toy_schema()).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.n_missing(), 2);
    }

    #[test]
    fn load_csv_header_mismatch_names_column() {
        let f = write_csv("a,wrong,y\n1.0,0,2.0\n");
        let err = load_csv(f.path(), &toy_schema()).unwrap_err();
        assert!(err.to_string().contains("'b'"), "got: {err}");
    }

    #[test]
    fn preprocess_range_filter_then_impute() {
        // 300 exceeds the max threshold of 250 and must be imputed to the
        // mean of the remaining training values.
        let f = write_csv("a,b,y\n10.0,1,1.0\n20.0,0,2.0\n300.0,1,3.0\n");
        let ds = load_csv(f.path(), &toy_schema()).unwrap();
        let out = preprocess(&ds, &[0, 1, 2]).unwrap();
        let stats = out.stats.as_ref().unwrap();
        assert_abs_diff_eq!(stats.feature_mean[0], 15.0, epsilon = 1e-12);
        // After imputation to 15 the standardized column has mean 0.
        let col: Vec<f64> = out.x.column(0).to_vec();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-10);
        // Binary column untouched apart from imputation.
        assert_eq!(out.x.column(1).to_vec(), vec![1.0, 0.0, 1.0]);
        // No missing markers remain.
        assert_eq!(out.n_missing(), 0);
    }

    #[test]
    fn preprocess_standardizes_train_exactly() {
        let f = write_csv("a,b,y\n1.0,0,1.0\n2.0,0,2.0\n3.0,0,3.0\n100.0,1,4.0\n");
        let ds = load_csv(f.path(), &toy_schema()).unwrap();
        let out = preprocess(&ds, &[0, 1, 2]).unwrap();
        let col = out.x.column(0);
        let train: Vec<f64> = vec![col[0], col[1], col[2]];
        let mean = train.iter().sum::<f64>() / 3.0;
        let std = (train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(std, 1.0, epsilon = 1e-10);
        // Test row is scaled by train statistics, not its own.
        assert!(col[3] > 10.0);
    }

    #[test]
    fn preprocess_leakage_canary() {
        // Enlarging the statistics pool with test rows must change the
        // imputed value; equality would mean leakage-free accounting failed.
        let f = write_csv("a,b,y\n1.0,0,1.0\n3.0,0,2.0\n,0,3.0\n200.0,0,4.0\n");
        let ds = load_csv(f.path(), &toy_schema()).unwrap();
        let train_only = preprocess(&ds, &[0, 1, 2]).unwrap();
        let with_test = preprocess(&ds, &[0, 1, 2, 3]).unwrap();
        let a = train_only.stats.as_ref().unwrap().feature_mean[0];
        let b = with_test.stats.as_ref().unwrap().feature_mean[0];
        assert_abs_diff_eq!(a, 2.0, epsilon = 1e-12);
        assert!((a - b).abs() > 10.0, "pooled mean {b} must drift from train mean {a}");
    }

    #[test]
    fn preprocess_zero_variance_column() {
        let f = write_csv("a,b,y\n5.0,0,1.0\n5.0,0,2.0\n5.0,1,3.0\n");
        let ds = load_csv(f.path(), &toy_schema()).unwrap();
        let out = preprocess(&ds, &[0, 1, 2]).unwrap();
        assert_abs_diff_eq!(out.stats.as_ref().unwrap().feature_std[0], 1.0);
        assert!(out.x.column(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn destandardize_round_trip() {
        let f = write_csv("a,b,y\n1.0,0,10.0\n2.0,0,20.0\n3.0,1,30.0\n");
        let ds = load_csv(f.path(), &toy_schema()).unwrap();
        let out = preprocess(&ds, &[0, 1, 2]).unwrap();
        let stats = out.stats.as_ref().unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(
                stats.destandardize_target(out.y[i]),
                ds.y[i],
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn kfold_partition_properties() {
        let plan = kfold(10, 10, 0).unwrap();
        assert!(plan.test_sets.iter().all(|t| t.len() == 1));

        let plan = kfold(17_903, 10, 7).unwrap();
        let mut sizes: Vec<usize> = (0..10).map(|f| plan.test_indices(f).len()).collect();
        sizes.sort_unstable();
        assert!(sizes.iter().all(|s| *s == 1790 || *s == 1791));
        assert_eq!(plan.n_total(), 17_903);

        // Partition: disjoint and covering.
        let mut seen = vec![false; 17_903];
        for f in 0..10 {
            for &i in plan.test_indices(f) {
                assert!(!seen[i], "index {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|s| *s));

        assert_eq!(kfold(100, 5, 3).unwrap(), kfold(100, 5, 3).unwrap());
        assert_ne!(kfold(100, 5, 3).unwrap(), kfold(100, 5, 4).unwrap());
        assert!(kfold(5, 6, 0).is_err());
        assert!(kfold(5, 1, 0).is_err());
    }

    #[test]
    fn sparse_linear_construction() {
        let (ds, w) = synth_sparse_linear(75, 512, 20, 0.005, 0);
        assert_eq!(ds.n(), 75);
        assert_eq!(ds.d(), 512);
        for row in ds.x.rows() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
        assert_eq!(w.iter().filter(|v| **v != 0.0).count(), 20);

        // Noise-free targets are exactly Xw.
        let (ds0, w0) = synth_sparse_linear(30, 8, 2, 0.0, 1);
        let clean = ds0.x.dot(&w0);
        for i in 0..30 {
            assert_abs_diff_eq!(ds0.y[i], clean[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn relevance_generator_properties() {
        let (ds, mask) = synth_relevance_classification(500, 4, 6, 3);
        assert_eq!(mask.iter().filter(|m| **m).count(), 4);
        let balance = ds.y.iter().sum::<f64>() / ds.y.len() as f64;
        assert!(balance > 0.3 && balance < 0.7, "balance {balance}");

        // All-relevant mask when no noise columns are requested.
        let (_, mask) = synth_relevance_classification(200, 3, 0, 0);
        assert!(mask.iter().all(|m| *m));

        // Labels identical when only the noise columns change.
        let (a, _) = synth_relevance_classification(300, 5, 5, 9);
        let (b, _) = synth_relevance_classification(300, 5, 5, 9);
        assert_eq!(a.y, b.y);
    }
}
