//! Loading, cleaning and summarizing reference RCT datasets in CSV form.
//!
//! A dataset is described by a JSON schema file listing the time, status and
//! treatment columns plus a `ColumnSpec` per covariate. Cells that are empty
//! or the literal `NA` are treated as missing and tracked in a mask — never
//! silently zeroed.

use crate::util::{mean, quantile_of, sample_sd};
use crate::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Ordinal,
}

/// Declaration of a single covariate column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
}

impl ColumnSpec {
    pub fn continuous(name: &str) -> Self {
        ColumnSpec { name: name.into(), kind: ColumnKind::Continuous, levels: None }
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            ColumnKind::Continuous => Ok(()),
            ColumnKind::Binary => match &self.levels {
                Some(l) if l.len() == 2 && l[0] < l[1] => Ok(()),
                _ => Err(Error::Schema(format!(
                    "binary column {:?} must declare exactly 2 increasing levels",
                    self.name
                ))),
            },
            ColumnKind::Ordinal => match &self.levels {
                Some(l) if l.len() >= 2 && l.windows(2).all(|w| w[0] < w[1]) => Ok(()),
                _ => Err(Error::Schema(format!(
                    "ordinal column {:?} must declare strictly increasing levels",
                    self.name
                ))),
            },
        }
    }
}

/// JSON schema for one dataset file: column roles plus covariate specs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    pub time: String,
    pub status: String,
    pub treatment: String,
    pub columns: Vec<ColumnSpec>,
    /// Covariate pairs whose products enter the model matrix (e.g. known
    /// treatment-covariate interactions).
    #[serde(default)]
    pub interactions: Vec<(String, String)>,
}

impl DatasetSchema {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let schema: DatasetSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("duplicate column names in schema".into()));
        }
        for c in &self.columns {
            c.validate()?;
        }
        if !self.columns.iter().any(|c| c.name == self.treatment) {
            return Err(Error::Schema(format!(
                "treatment column {:?} not among covariates",
                self.treatment
            )));
        }
        for (a, b) in &self.interactions {
            for name in [a, b] {
                if !self.columns.iter().any(|c| &c.name == name) {
                    return Err(Error::Schema(format!(
                        "interaction references unknown column {name:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A right-censored survival dataset: covariate matrix, follow-up times,
/// event indicators, and a missingness mask aligned with the matrix.
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    pub columns: Vec<ColumnSpec>,
    pub x: Array2<f64>,
    pub time: Vec<f64>,
    pub status: Vec<u8>,
    pub missing: Array2<bool>,
}

impl SurvivalDataset {
    /// Number of rows.
    pub fn n(&self) -> usize {
        self.time.len()
    }

    /// Number of covariate columns.
    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn col_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Construct a fully observed dataset from raw parts (continuous
    /// columns).
    pub fn from_parts(
        names: Vec<String>,
        x: Array2<f64>,
        time: Vec<f64>,
        status: Vec<u8>,
    ) -> Result<Self> {
        if x.nrows() != time.len() || time.len() != status.len() {
            return Err(Error::Data("row count mismatch between X, time, status".into()));
        }
        if names.len() != x.ncols() {
            return Err(Error::Data("column name count mismatch".into()));
        }
        if let Some(i) = time.iter().position(|&t| !(t > 0.0)) {
            return Err(Error::Data(format!("time[{i}] = {} is not positive", time[i])));
        }
        if status.iter().any(|&s| s > 1) {
            return Err(Error::Data("status outside {0,1}".into()));
        }
        let missing = Array2::from_elem(x.raw_dim(), false);
        let columns = names.iter().map(|n| ColumnSpec::continuous(n)).collect();
        Ok(SurvivalDataset { columns, x, time, status, missing })
    }

    /// Clone the rows at `idx` (repeats allowed, e.g. bootstrap resamples).
    pub fn subset(&self, idx: &[usize]) -> SurvivalDataset {
        let d = self.d();
        let mut x = Array2::zeros((idx.len(), d));
        let mut missing = Array2::from_elem((idx.len(), d), false);
        let mut time = Vec::with_capacity(idx.len());
        let mut status = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..d {
                x[[r, c]] = self.x[[i, c]];
                missing[[r, c]] = self.missing[[i, c]];
            }
            time.push(self.time[i]);
            status.push(self.status[i]);
        }
        SurvivalDataset { columns: self.columns.clone(), x, time, status, missing }
    }

    /// Dataset restricted to the covariate columns at `cols` (in that
    /// order).
    pub fn select_columns(&self, cols: &[usize]) -> SurvivalDataset {
        let n = self.n();
        let mut x = Array2::zeros((n, cols.len()));
        let mut missing = Array2::from_elem((n, cols.len()), false);
        for (k, &c) in cols.iter().enumerate() {
            for r in 0..n {
                x[[r, k]] = self.x[[r, c]];
                missing[[r, k]] = self.missing[[r, c]];
            }
        }
        SurvivalDataset {
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            x,
            time: self.time.clone(),
            status: self.status.clone(),
            missing,
        }
    }

    /// Append product columns for the given covariate pairs (named
    /// `"a:b"`). A product cell is missing if either parent cell is.
    pub fn with_interactions(&self, pairs: &[(String, String)]) -> Result<SurvivalDataset> {
        if pairs.is_empty() {
            return Ok(self.clone());
        }
        let n = self.n();
        let d = self.d();
        let mut x = Array2::zeros((n, d + pairs.len()));
        let mut missing = Array2::from_elem((n, d + pairs.len()), false);
        x.slice_mut(ndarray::s![.., ..d]).assign(&self.x);
        missing.slice_mut(ndarray::s![.., ..d]).assign(&self.missing);
        let mut columns = self.columns.clone();
        for (k, (a, b)) in pairs.iter().enumerate() {
            let ia = self
                .col_index(a)
                .ok_or_else(|| Error::Schema(format!("unknown interaction column {a:?}")))?;
            let ib = self
                .col_index(b)
                .ok_or_else(|| Error::Schema(format!("unknown interaction column {b:?}")))?;
            for r in 0..n {
                x[[r, d + k]] = self.x[[r, ia]] * self.x[[r, ib]];
                missing[[r, d + k]] = self.missing[[r, ia]] || self.missing[[r, ib]];
            }
            columns.push(ColumnSpec::continuous(&format!("{a}:{b}")));
        }
        Ok(SurvivalDataset {
            columns,
            x,
            time: self.time.clone(),
            status: self.status.clone(),
            missing,
        })
    }

    /// Count of missing cells in the column at `col`.
    pub fn missing_count(&self, col: usize) -> usize {
        (0..self.n()).filter(|&r| self.missing[[r, col]]).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn n_events(&self) -> usize {
        self.status.iter().filter(|&&s| s == 1).count()
    }
}

fn parse_cell(raw: &str, column: &str, row: usize) -> Result<Option<f64>> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == "NA" {
        return Ok(None);
    }
    trimmed
        .parse::<f64>()
        .map(Some)
        .map_err(|_| Error::BadCell { column: column.into(), row, value: raw.into() })
}

/// Load a CSV file against a schema. Rows are parsed in order; empty/`NA`
/// cells are flagged in the missing mask. Errors on a missing required
/// column, a non-numeric value outside the missing convention, a
/// nonpositive time, or a status outside {0,1}.
pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<SurvivalDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("required column {name:?} not in header")))
    };
    let time_pos = position(&schema.time)?;
    let status_pos = position(&schema.status)?;
    let col_pos: Vec<usize> =
        schema.columns.iter().map(|c| position(&c.name)).collect::<Result<_>>()?;

    let d = schema.columns.len();
    let mut rows: Vec<(f64, u8, Vec<Option<f64>>)> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 2; // 1-based, after the header line
        let time = parse_cell(&record[time_pos], &schema.time, row)?
            .ok_or_else(|| Error::Data(format!("missing time value in row {row}")))?;
        if !(time > 0.0) {
            return Err(Error::Data(format!("row {row}: time {time} is not positive")));
        }
        let status_raw = parse_cell(&record[status_pos], &schema.status, row)?
            .ok_or_else(|| Error::Data(format!("missing status value in row {row}")))?;
        let status = if status_raw == 0.0 {
            0u8
        } else if status_raw == 1.0 {
            1u8
        } else {
            return Err(Error::Data(format!(
                "row {row}: status {status_raw} outside {{0,1}}"
            )));
        };
        let mut cells = Vec::with_capacity(d);
        for (spec, &pos) in schema.columns.iter().zip(&col_pos) {
            let cell = parse_cell(&record[pos], &spec.name, row)?;
            if let Some(v) = cell {
                if let Some(levels) = &spec.levels {
                    if !levels.contains(&v) {
                        return Err(Error::Data(format!(
                            "row {row}: value {v} of {:?} not among declared levels",
                            spec.name
                        )));
                    }
                }
            }
            cells.push(cell);
        }
        rows.push((time, status, cells));
    }

    let n = rows.len();
    let mut x = Array2::zeros((n, d));
    let mut missing = Array2::from_elem((n, d), false);
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for (r, (t, s, cells)) in rows.into_iter().enumerate() {
        time.push(t);
        status.push(s);
        for (c, cell) in cells.into_iter().enumerate() {
            match cell {
                Some(v) => x[[r, c]] = v,
                None => missing[[r, c]] = true,
            }
        }
    }
    Ok(SurvivalDataset { columns: schema.columns.clone(), x, time, status, missing })
}

/// Replace each missing cell by the mean of the observed values in its
/// column. Missing values must occur only in continuous columns; a column
/// with no observed values at all is an error.
pub fn impute_column_means(ds: &SurvivalDataset) -> Result<SurvivalDataset> {
    let mut out = ds.clone();
    for c in 0..ds.d() {
        let observed: Vec<f64> =
            (0..ds.n()).filter(|&r| !ds.missing[[r, c]]).map(|r| ds.x[[r, c]]).collect();
        let n_missing = ds.n() - observed.len();
        if n_missing == 0 {
            continue;
        }
        if ds.columns[c].kind != ColumnKind::Continuous {
            return Err(Error::Data(format!(
                "column {:?} is categorical but has missing values",
                ds.columns[c].name
            )));
        }
        if observed.is_empty() {
            return Err(Error::AllMissing(ds.columns[c].name.clone()));
        }
        let m = mean(&observed);
        for r in 0..ds.n() {
            if out.missing[[r, c]] {
                out.x[[r, c]] = m;
                out.missing[[r, c]] = false;
            }
        }
    }
    Ok(out)
}

/// Summary statistics for one column, computed on observed values only.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnSummary {
    pub name: String,
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n_missing: usize,
    /// Relative frequency per declared level, for binary/ordinal columns.
    pub level_freqs: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryTable {
    pub n: usize,
    pub n_events: usize,
    pub follow_up: ColumnSummary,
    pub columns: Vec<ColumnSummary>,
}

fn summarize_values(name: &str, values: &[f64], n_missing: usize) -> ColumnSummary {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ColumnSummary {
        name: name.into(),
        median: quantile_of(values, 0.5),
        mean: mean(values),
        sd: if values.len() >= 2 { sample_sd(values) } else { 0.0 },
        min,
        max,
        n_missing,
        level_freqs: None,
    }
}

/// Per-column summary table (medians, means, sample standard deviations,
/// ranges, missing counts; level frequencies for categorical columns).
pub fn summarize(ds: &SurvivalDataset) -> Result<SummaryTable> {
    if ds.n() == 0 {
        return Err(Error::Degenerate("cannot summarize an empty dataset".into()));
    }
    let mut columns = Vec::with_capacity(ds.d());
    for c in 0..ds.d() {
        let observed: Vec<f64> =
            (0..ds.n()).filter(|&r| !ds.missing[[r, c]]).map(|r| ds.x[[r, c]]).collect();
        if observed.is_empty() {
            return Err(Error::AllMissing(ds.columns[c].name.clone()));
        }
        let mut summary = summarize_values(&ds.columns[c].name, &observed, ds.n() - observed.len());
        if let Some(levels) = &ds.columns[c].levels {
            let freqs: Vec<(f64, f64)> = levels
                .iter()
                .map(|&l| {
                    let count = observed.iter().filter(|&&v| v == l).count();
                    (l, count as f64 / observed.len() as f64)
                })
                .collect();
            debug_assert!((freqs.iter().map(|&(_, f)| f).sum::<f64>() - 1.0).abs() < 1e-9);
            summary.level_freqs = Some(freqs);
        }
        columns.push(summary);
    }
    Ok(SummaryTable {
        n: ds.n(),
        n_events: ds.n_events(),
        follow_up: summarize_values("time", &ds.time, 0),
        columns,
    })
}
