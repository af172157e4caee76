//! The `fetch` subcommand: downloads the UCI benchmark files, normalizes
//! them into canonical header-row CSVs plus schema JSONs, and verifies the
//! pinned checksums.
//!
//! Normalization parses every cell to f64 and re-emits it with Rust's
//! shortest round-trip formatting, so the canonical bytes are identical no
//! matter which mirror or raw encoding (whitespace or semicolon separated)
//! the data came from.

use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use hsbnn_core::data::{FeatureSpec, Schema, TargetSpec};
use hsbnn_core::models::Task;

use crate::{CliError, CliResult};

pub struct DatasetDescriptor {
    pub name: &'static str,
    pub url: &'static str,
    pub feature_names: &'static [&'static str],
    pub target_name: &'static str,
    pub expected_rows: usize,
    /// SHA-256 of the canonical CSV bytes.
    pub sha256: &'static str,
}

pub const DATASETS: &[DatasetDescriptor] = &[
    DatasetDescriptor {
        name: "yacht",
        url: "https://archive.ics.uci.edu/ml/machine-learning-databases/00243/yacht_hydrodynamics.data",
        feature_names: &[
            "longitudinal_position",
            "prismatic_coefficient",
            "length_displacement_ratio",
            "beam_draught_ratio",
            "length_beam_ratio",
            "froude_number",
        ],
        target_name: "residuary_resistance",
        expected_rows: 308,
        sha256: "a767e2387c0db312c9bfb039bfdef76ac1b22d821f71ea0a4f0a695e67dac0fd",
    },
    DatasetDescriptor {
        name: "boston",
        url: "https://archive.ics.uci.edu/ml/machine-learning-databases/housing/housing.data",
        feature_names: &[
            "crim", "zn", "indus", "chas", "nox", "rm", "age", "dis", "rad", "tax",
            "ptratio", "b", "lstat",
        ],
        target_name: "medv",
        expected_rows: 506,
        sha256: "24ec814c9b6c5bb1cae0f6d203636413195ade13a34b62920787599f63eefd7e",
    },
    DatasetDescriptor {
        name: "wine",
        url: "https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-red.csv",
        feature_names: &[
            "fixed_acidity",
            "volatile_acidity",
            "citric_acid",
            "residual_sugar",
            "chlorides",
            "free_sulfur_dioxide",
            "total_sulfur_dioxide",
            "density",
            "ph",
            "sulphates",
            "alcohol",
        ],
        target_name: "quality",
        expected_rows: 1599,
        sha256: "76bb397799995e9bdf3eafaefc25fbf74b0fbc3d278059eacd0daf6d440555f8",
    },
];

pub fn descriptor(name: &str) -> CliResult<&'static DatasetDescriptor> {
    DATASETS
        .iter()
        .find(|d| d.name == name)
        .ok_or_else(|| CliError::usage(format!("unknown dataset '{name}'; known: yacht, boston, wine")))
}

fn read_source(source: &str) -> CliResult<String> {
    if source.contains("://") {
        let mut response = ureq::get(source)
            .call()
            .map_err(|e| CliError::runtime(format!("download {source}: {e}")))?;
        let mut text = String::new();
        response
            .body_mut()
            .as_reader()
            .read_to_string(&mut text)
            .map_err(|e| CliError::runtime(format!("read {source}: {e}")))?;
        Ok(text)
    } else {
        std::fs::read_to_string(source)
            .map_err(|e| CliError::usage(format!("cannot read {source}: {e}")))
    }
}

/// Parses whitespace- or semicolon-separated numeric rows, skipping a header
/// line when the first line is not fully numeric.
fn parse_raw(text: &str, n_cols: usize, source: &str) -> CliResult<Vec<Vec<f64>>> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.is_empty() {
        return Err(CliError::runtime(format!("{source}: empty file")));
    }
    let semicolon = lines[0].contains(';');
    let split = |line: &str| -> Vec<String> {
        if semicolon {
            line.split(';').map(|c| c.trim().trim_matches('"').to_string()).collect()
        } else {
            line.split_whitespace().map(str::to_string).collect()
        }
    };
    let first = split(lines[0]);
    let has_header = first.iter().any(|c| c.parse::<f64>().is_err());

    let mut rows = Vec::new();
    for (i, line) in lines.iter().enumerate().skip(usize::from(has_header)) {
        let cells = split(line);
        if cells.len() != n_cols {
            return Err(CliError::runtime(format!(
                "{source} line {}: expected {n_cols} columns, found {}",
                i + 1,
                cells.len()
            )));
        }
        let row: Vec<f64> = cells
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| {
                    CliError::runtime(format!("{source} line {}: non-numeric cell '{c}'", i + 1))
                })
            })
            .collect::<CliResult<_>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn canonical_csv(desc: &DatasetDescriptor, rows: &[Vec<f64>]) -> String {
    let mut out = desc.feature_names.join(",");
    out.push(',');
    out.push_str(desc.target_name);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn schema_for(desc: &DatasetDescriptor) -> Schema {
    Schema {
        features: desc
            .feature_names
            .iter()
            .map(|n| FeatureSpec::continuous(*n))
            .collect(),
        target: TargetSpec { name: desc.target_name.into(), task: Task::Regression },
    }
}

pub struct FetchOutcome {
    pub name: String,
    pub rows: usize,
    pub sha256: String,
    pub verified: bool,
}

/// Fetches one dataset from `source` (defaults to the canonical URL),
/// normalizes it, checks the pinned checksum, and writes
/// `<out>/<name>.csv` + `<out>/<name>.schema.json`.
pub fn fetch_one(name: &str, source: Option<&str>, out_dir: &Path) -> CliResult<FetchOutcome> {
    let desc = descriptor(name)?;
    let source = source.unwrap_or(desc.url);
    let text = read_source(source)?;
    let n_cols = desc.feature_names.len() + 1;
    let rows = parse_raw(&text, n_cols, source)?;
    if rows.len() != desc.expected_rows {
        return Err(CliError::runtime(format!(
            "{name}: expected {} rows, parsed {}",
            desc.expected_rows,
            rows.len()
        )));
    }
    let csv = canonical_csv(desc, &rows);
    let digest = hex::encode(Sha256::digest(csv.as_bytes()));
    let verified = if desc.sha256.is_empty() {
        log::warn!("{name}: no pinned checksum; computed {digest}");
        false
    } else if digest != desc.sha256 {
        return Err(CliError::runtime(format!(
            "{name}: checksum mismatch: expected {}, got {digest}; refusing to write",
            desc.sha256
        )));
    } else {
        true
    };

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    std::fs::write(out_dir.join(format!("{name}.csv")), &csv)
        .map_err(|e| CliError::runtime(format!("cannot write {name}.csv: {e}")))?;
    schema_for(desc)
        .to_json_file(&out_dir.join(format!("{name}.schema.json")))
        .map_err(|e| CliError::runtime(format!("cannot write schema: {e}")))?;

    Ok(FetchOutcome { name: name.into(), rows: rows.len(), sha256: digest, verified })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_semicolon_with_header() {
        let text = "\"a\";\"b\";\"y\"\n1.5;2;3\n4;5;6\n";
        let rows = parse_raw(text, 3, "test").unwrap();
        assert_eq!(rows, vec![vec![1.5, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
    }

    #[test]
    fn parses_whitespace_without_header() {
        let text = " 1.0  2.0 3\n-4 5.5   6\n\n";
        let rows = parse_raw(text, 3, "test").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][0], -4.0);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(parse_raw("1 2 3\n4 5\n", 3, "test").is_err());
    }
}
