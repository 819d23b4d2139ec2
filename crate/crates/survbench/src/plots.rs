//! Plot-ready CSV summaries derived from a results directory: boxplot
//! five-number summaries per metric, calibration bands per scenario, and a
//! timing table. Everything is emitted as plain CSV so any plotting
//! front-end can consume it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use survcore::util::{mean, quantile_of, quantile_type7};
use survcore::{Error, Result};

use crate::engine::{read_calibration_rows, read_results, CalibrationRow, ResultRow};

/// Five-number summary with type-7 quantiles plus the points beyond the
/// 1.5·IQR fences.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxplotSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

pub fn boxplot_summary(values: &[f64]) -> Option<BoxplotSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&sorted, 0.25);
    let median = quantile_type7(&sorted, 0.5);
    let q3 = quantile_type7(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Some(BoxplotSummary {
        n: sorted.len(),
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        outliers: sorted.iter().copied().filter(|&v| v < lo || v > hi).collect(),
    })
}

/// Fixed probability grid the per-replicate calibration curves are
/// interpolated onto so replicates can be aggregated pointwise.
pub fn band_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Linear interpolation of a curve (x strictly increasing) at `p`, clamping
/// to the endpoint values outside the observed range.
fn interp_clamped(xs: &[f64], ys: &[f64], p: f64) -> f64 {
    if p <= xs[0] {
        return ys[0];
    }
    if p >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let j = xs.partition_point(|&x| x < p);
    let (x0, x1) = (xs[j - 1], xs[j]);
    let (y0, y1) = (ys[j - 1], ys[j]);
    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn group_label(r: &ResultRow) -> Vec<String> {
    vec![
        r.reference.clone(),
        r.n_train.to_string(),
        fmt(r.censoring),
        fmt(r.beta_treatment),
        r.gamma_spec.clone(),
        r.method.clone(),
    ]
}

fn write_boxplot_file(path: &Path, metric: &str, rows: &[&ResultRow]) -> Result<()> {
    // group by (scenario fields, method) in first-appearance order
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut groups: HashMap<Vec<String>, Vec<f64>> = HashMap::new();
    for row in rows {
        let label = group_label(row);
        if !groups.contains_key(&label) {
            order.push(label.clone());
            groups.insert(label.clone(), Vec::new());
        }
        if let Some(v) = row.value {
            groups.get_mut(&label).unwrap().push(v);
        }
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "reference",
        "n_train",
        "censoring",
        "beta_treatment",
        "gamma_spec",
        "method",
        "metric",
        "n",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "outliers",
    ])?;
    for label in order {
        let values = &groups[&label];
        let mut record = label.clone();
        record.push(metric.to_string());
        match boxplot_summary(values) {
            Some(s) => {
                record.push(s.n.to_string());
                record.push(fmt(s.min));
                record.push(fmt(s.q1));
                record.push(fmt(s.median));
                record.push(fmt(s.q3));
                record.push(fmt(s.max));
                record.push(
                    s.outliers.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";"),
                );
            }
            None => {
                record.push("0".to_string());
                record.extend(std::iter::repeat(String::new()).take(6));
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_calibration_bands(path: &Path, rows: &[CalibrationRow]) -> Result<()> {
    // methods in first-appearance order; replicate curves already sorted by
    // predicted value within (method, replicate)
    let mut method_order: Vec<String> = Vec::new();
    let mut curves: HashMap<(String, u64), (Vec<f64>, Vec<f64>)> = HashMap::new();
    for r in rows {
        if !method_order.contains(&r.method) {
            method_order.push(r.method.clone());
        }
        let entry = curves.entry((r.method.clone(), r.replicate)).or_default();
        entry.0.push(r.predicted);
        entry.1.push(r.observed);
    }
    let grid = band_grid();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["method", "p", "mean_observed", "lo", "hi", "n_replicates"])?;
    for method in &method_order {
        let mut reps: Vec<u64> = curves
            .keys()
            .filter(|(m, _)| m == method)
            .map(|(_, rep)| *rep)
            .collect();
        reps.sort_unstable();
        for &p in &grid {
            let at_p: Vec<f64> = reps
                .iter()
                .map(|rep| {
                    let (xs, ys) = &curves[&(method.clone(), *rep)];
                    interp_clamped(xs, ys, p)
                })
                .collect();
            writer.write_record([
                method.clone(),
                fmt(p),
                fmt(mean(&at_p)),
                fmt(quantile_of(&at_p, 0.025)),
                fmt(quantile_of(&at_p, 0.975)),
                at_p.len().to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

fn write_timing(path: &Path, rows: &[ResultRow]) -> Result<()> {
    // one timing observation per task (a task's metric rows share the same
    // fit/predict measurements); only tasks whose fit succeeded count
    let mut seen: HashMap<(String, String, u64, usize), (f64, f64)> = HashMap::new();
    for r in rows {
        if r.dropped && r.drop_reason.starts_with("fit:") {
            continue;
        }
        seen.entry((r.scenario_identity(), r.method.clone(), r.replicate, r.n_train))
            .or_insert((r.fit_ms, r.predict_ms));
    }
    let mut cells: HashMap<(String, usize), (Vec<f64>, Vec<f64>)> = HashMap::new();
    for ((_, method, _, n_train), (fit, predict)) in &seen {
        let entry = cells.entry((method.clone(), *n_train)).or_default();
        entry.0.push(*fit);
        entry.1.push(*predict);
    }
    let mut keys: Vec<(String, usize)> = cells.keys().cloned().collect();
    keys.sort();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["method", "n_train", "mean_fit_ms", "mean_predict_ms", "n_fits"])?;
    for key in keys {
        let (fit, predict) = &cells[&key];
        writer.write_record([
            key.0.clone(),
            key.1.to_string(),
            format!("{:.3}", mean(fit)),
            format!("{:.3}", mean(predict)),
            fit.len().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Derive plot-ready CSVs from a results directory: one boxplot file per
/// metric, one calibration-band file per scenario sidecar, and a timing
/// table. Returns the paths written.
pub fn emit_plot_data(results_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let results_path = results_dir.join("results.csv");
    if !results_path.exists() {
        return Err(Error::InvalidArgument(format!(
            "no results.csv in {}",
            results_dir.display()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let rows = read_results(&results_path)?;
    let mut written = Vec::new();

    let mut metric_order: Vec<String> = Vec::new();
    for r in &rows {
        if !metric_order.contains(&r.metric) {
            metric_order.push(r.metric.clone());
        }
    }
    for metric in &metric_order {
        let subset: Vec<&ResultRow> = rows.iter().filter(|r| &r.metric == metric).collect();
        let path = out_dir.join(format!("boxplot_{metric}.csv"));
        write_boxplot_file(&path, metric, &subset)?;
        written.push(path);
    }

    let mut sidecars: Vec<PathBuf> = std::fs::read_dir(results_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map_or(false, |n| n.starts_with("calibration_") && n.ends_with(".csv"))
        })
        .collect();
    sidecars.sort();
    for sidecar in sidecars {
        let name = sidecar.file_name().unwrap().to_str().unwrap();
        let key = &name["calibration_".len()..name.len() - ".csv".len()];
        let curve_rows = read_calibration_rows(&sidecar)?;
        if curve_rows.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("calibration_bands_{key}.csv"));
        write_calibration_bands(&path, &curve_rows)?;
        written.push(path);
    }

    let timing_path = out_dir.join("timing.csv");
    write_timing(&timing_path, &rows)?;
    written.push(timing_path);
    Ok(written)
}
