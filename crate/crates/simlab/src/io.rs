//! Dataset CSV and estimate JSON file formats.
//!
//! The dataset format is a plain-text CSV with header `x1,...,xp,a,y`, one
//! subject per row, decimal numbers with a `.` radix, and LF or CRLF line
//! endings. Estimates travel as JSON documents carrying the value, standard
//! error, residuals, and fitting metadata.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use itrval::data::{DataError, Dataset};
use itrval::simgen::ScenarioSpec;
use itrval::value::{Method, ValueEstimate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CsvError {
    #[error("file is empty")]
    Empty,
    #[error("bad header: expected x1,...,xp,a,y, found `{0}`")]
    BadHeader(String),
    #[error("line {line}: expected {want} cells, found {got}")]
    WrongCellCount { line: usize, want: usize, got: usize },
    #[error("line {line}, column {column}: `{cell}` is not a number")]
    BadNumber { line: usize, column: String, cell: String },
    #[error("line {line}, column {column}: value is not finite")]
    NonFinite { line: usize, column: String },
    #[error("line {line}, column a: `{cell}` is not a treatment label")]
    BadArmLabel { line: usize, cell: String },
    #[error("line {line}: treatment label {arm} is outside 0..{arms}")]
    ArmOutOfRange { line: usize, arm: usize, arms: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Parses the dataset CSV format. When `arm_count` is `None` the number of
/// arms is inferred as one past the largest label seen (at least two).
pub fn parse_dataset_csv(text: &str, arm_count: Option<usize>) -> Result<Dataset, CsvError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CsvError::Empty)?;
    let names: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    if names.len() < 3
        || names[names.len() - 2] != "a"
        || names[names.len() - 1] != "y"
        || names[..names.len() - 2]
            .iter()
            .enumerate()
            .any(|(i, name)| *name != format!("x{}", i + 1))
    {
        return Err(CsvError::BadHeader(header.trim_end_matches('\r').to_string()));
    }
    let p = names.len() - 2;

    let mut covariates = Vec::new();
    let mut arms = Vec::new();
    let mut outcomes = Vec::new();
    for (index, raw) in lines {
        let line = index + 1; // 1-based, counting the header as line 1
        let row = raw.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').map(str::trim).collect();
        if cells.len() != p + 2 {
            return Err(CsvError::WrongCellCount { line, want: p + 2, got: cells.len() });
        }
        for (d, cell) in cells[..p].iter().enumerate() {
            let column = format!("x{}", d + 1);
            let value: f64 = cell.parse().map_err(|_| CsvError::BadNumber {
                line,
                column: column.clone(),
                cell: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(CsvError::NonFinite { line, column });
            }
            covariates.push(value);
        }
        let arm: usize = cells[p]
            .parse()
            .map_err(|_| CsvError::BadArmLabel { line, cell: cells[p].to_string() })?;
        if let Some(arms_total) = arm_count {
            if arm >= arms_total {
                return Err(CsvError::ArmOutOfRange { line, arm, arms: arms_total });
            }
        }
        arms.push(arm);
        let cell = cells[p + 1];
        let y: f64 = cell.parse().map_err(|_| CsvError::BadNumber {
            line,
            column: "y".to_string(),
            cell: cell.to_string(),
        })?;
        if !y.is_finite() {
            return Err(CsvError::NonFinite { line, column: "y".to_string() });
        }
        outcomes.push(y);
    }

    let arms_total = match arm_count {
        Some(k) => k,
        None => arms.iter().max().map_or(2, |&m| (m + 1).max(2)),
    };
    Ok(Dataset::new(covariates, p, arms, outcomes, arms_total)?)
}

/// Renders a dataset in the CSV format. Numbers use Rust's shortest
/// round-trip representation, so parsing the output recovers identical bits.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for d in 1..=data.p() {
        out.push_str(&format!("x{d},"));
    }
    out.push_str("a,y\n");
    for i in 0..data.n() {
        for x in data.row(i) {
            out.push_str(&format!("{x},"));
        }
        out.push_str(&format!("{},{}\n", data.arm(i), data.outcome(i)));
    }
    out
}

/// Reads a dataset CSV from disk.
pub fn load_dataset(path: &Path, arm_count: Option<usize>) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read dataset {}", path.display()))?;
    parse_dataset_csv(&text, arm_count)
        .with_context(|| format!("cannot parse dataset {}", path.display()))
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, dataset_to_csv(data))
        .with_context(|| format!("cannot write dataset {}", path.display()))
}

/// Sidecar document describing how a generated dataset was drawn.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSidecar {
    pub scenario: u8,
    pub n: usize,
    pub seed: u64,
    pub covariate_range: [f64; 2],
    pub noise_sd: f64,
    pub nuisance_dims: usize,
    pub arm_count: usize,
}

impl ScenarioSidecar {
    pub fn new(spec: &ScenarioSpec, n: usize, seed: u64) -> Self {
        let (lo, hi) = spec.covariate_range();
        Self {
            scenario: spec.scenario(),
            n,
            seed,
            covariate_range: [lo, hi],
            noise_sd: spec.noise_sd(),
            nuisance_dims: spec.nuisance_dims(),
            arm_count: itrval::simgen::ARM_COUNT,
        }
    }
}

/// A value estimate as written by `simlab estimate` and read back by
/// `simlab compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateFile {
    pub method: String,
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub residuals: Vec<f64>,
    #[serde(default)]
    pub metadata: EstimateMetadata,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstimateMetadata {
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub propensity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_seed: Option<u64>,
    #[serde(default)]
    pub clip_events: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic_converged: Option<bool>,
}

impl EstimateFile {
    pub fn from_estimate(estimate: &ValueEstimate, metadata: EstimateMetadata) -> Self {
        Self {
            method: estimate.method.as_str().to_string(),
            value: estimate.value,
            std_error: estimate.std_error,
            n: estimate.n,
            residuals: estimate.residuals.clone(),
            metadata,
        }
    }

    /// Rebuilds the in-memory estimate; used by `simlab compare`.
    pub fn to_estimate(&self) -> Result<ValueEstimate> {
        let method = match self.method.as_str() {
            "plugin" => Method::Plugin,
            "cv" => Method::Cv,
            "jackknife" => Method::Jackknife,
            "empirical" => Method::Empirical,
            other => anyhow::bail!("unknown estimate method `{other}`"),
        };
        Ok(ValueEstimate {
            value: self.value,
            residuals: self.residuals.clone(),
            std_error: self.std_error,
            n: self.n,
            method,
            clip_events: self.metadata.clip_events,
        })
    }
}

pub fn load_estimate(path: &Path) -> Result<EstimateFile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read estimate {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("cannot parse estimate {}", path.display()))
}

/// Result document written by `simlab compare`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonFile {
    pub t_stat: f64,
    pub p_value: f64,
    pub se_diff: f64,
    pub v_pmm: f64,
    pub v_zom: f64,
    pub n: usize,
    pub alternative: String,
}

/// Formats with 17 significant digits, enough to reconstruct the exact
/// binary value from the text.
pub fn g17(value: f64) -> String {
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_file() {
        let text = "x1,x2,a,y\n0.5,1.5,0,2.25\n-1,0,1,3\n2,2,1,-0.5\n";
        let data = parse_dataset_csv(text, Some(2)).unwrap();
        assert_eq!(data.n(), 3);
        assert_eq!(data.p(), 2);
        assert_eq!(data.arm_count(), 2);
        assert_eq!(data.row(0), &[0.5, 1.5]);
        assert_eq!(data.arm(2), 1);
        assert_eq!(data.outcome(1), 3.0);
    }

    #[test]
    fn accepts_crlf_and_trailing_newline() {
        let text = "x1,a,y\r\n1.0,0,2.0\r\n2.0,1,3.0\r\n\r\n";
        let data = parse_dataset_csv(text, None).unwrap();
        assert_eq!(data.n(), 2);
    }

    #[test]
    fn arm_out_of_declared_range_is_rejected() {
        let text = "x1,a,y\n1.0,0,2.0\n2.0,5,3.0\n";
        let err = parse_dataset_csv(text, Some(3)).unwrap_err();
        assert_eq!(err, CsvError::ArmOutOfRange { line: 3, arm: 5, arms: 3 });
    }

    #[test]
    fn non_finite_outcome_is_rejected_with_location() {
        let text = "x1,a,y\n1.0,0,NaN\n2.0,1,3.0\n";
        let err = parse_dataset_csv(text, None).unwrap_err();
        assert_eq!(err, CsvError::NonFinite { line: 2, column: "y".to_string() });
    }

    #[test]
    fn junk_cells_name_row_and_column() {
        let text = "x1,x2,a,y\n1.0,oops,0,2.0\n";
        let err = parse_dataset_csv(text, None).unwrap_err();
        assert_eq!(
            err,
            CsvError::BadNumber { line: 2, column: "x2".to_string(), cell: "oops".to_string() }
        );
        let text = "x1,a,y\n1.0,1.5,2.0\n";
        let err = parse_dataset_csv(text, None).unwrap_err();
        assert_eq!(err, CsvError::BadArmLabel { line: 2, cell: "1.5".to_string() });
    }

    #[test]
    fn header_must_match() {
        for bad in ["x1,x3,a,y\n", "a,y\n", "x1,y,a\n", ""] {
            assert!(parse_dataset_csv(bad, None).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let text = "x1,x2,a,y\n0.1,-2.75,0,3.25\n1e-3,4.0,1,-0.125\n2,3,2,9.5\n";
        let first = parse_dataset_csv(text, Some(3)).unwrap();
        let second = parse_dataset_csv(&dataset_to_csv(&first), Some(3)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn g17_round_trips_exactly() {
        for &v in &[0.1, -3.0e14, 2.718281828459045, 1.0 / 3.0, 5e-324_f64, 0.0] {
            let parsed: f64 = g17(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "{v}");
        }
    }

    #[test]
    fn estimate_file_round_trips() {
        let estimate = ValueEstimate {
            value: 1.5,
            residuals: vec![-0.5, 0.5],
            std_error: 0.5,
            n: 2,
            method: Method::Jackknife,
            clip_events: 1,
        };
        let file = EstimateFile::from_estimate(
            &estimate,
            EstimateMetadata { model: "krr".into(), clip_events: 1, ..Default::default() },
        );
        let json = serde_json::to_string(&file).unwrap();
        let back: EstimateFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_estimate().unwrap(), estimate);
    }
}
