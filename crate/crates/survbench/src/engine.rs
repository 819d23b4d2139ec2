//! Executes an experiment plan: simulate → fit → score, into a results table.
//!
//! The runner is resumable (rows already present in `results.csv` are not
//! recomputed) and deterministic: a plan plus its seed fixes every dataset,
//! every fitted model, and the byte content of the output files (timing
//! columns aside) regardless of worker count.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use survcore::coxph::{self, CoxModel, CoxOptions, Criterion};
use survcore::dataio::{self, DatasetSchema, SurvivalDataset};
use survcore::metrics::{calibration_curve, default_ibs_horizon, harrell_c, integrated_brier};
use survcore::rng::{derive_stream, stream_key};
use survcore::rsf::{default_grid, grow_forest, tune_grid, ForestParams, SurvivalForest};
use survcore::simgen::{
    calibrate_censoring_bound, generate_dataset, CopulaModel, HazardSpec, Reference,
    ScenarioConfig, DEFAULT_FAMILIES,
};
use survcore::util::median;
use survcore::{Error, Result};

use crate::plan::{ExperimentPlan, Method, PlanMetric};

/// Minimum number of tasks per checkpoint batch, and a cap on how many times
/// a run rewrites its output files. Both are fixed constants of the task list
/// so the batching never depends on worker count or timing.
const CHECKPOINT_TASKS: usize = 32;
const MAX_CHECKPOINTS: usize = 64;

/// Column order of `results.csv`.
pub const RESULT_COLUMNS: [&str; 13] = [
    "reference",
    "n_train",
    "censoring",
    "beta_treatment",
    "gamma_spec",
    "method",
    "replicate",
    "metric",
    "value",
    "fit_ms",
    "predict_ms",
    "dropped",
    "drop_reason",
];

/// One metric evaluation for one (scenario, method, replicate).
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub reference: String,
    pub n_train: usize,
    pub censoring: f64,
    pub beta_treatment: f64,
    pub gamma_spec: String,
    pub method: String,
    pub replicate: u64,
    pub metric: String,
    /// Metric value; `None` when the row was dropped.
    pub value: Option<f64>,
    pub fit_ms: f64,
    pub predict_ms: f64,
    pub dropped: bool,
    pub drop_reason: String,
}

impl ResultRow {
    /// The scenario fields joined as in [`scenario_key`]; two scenarios in
    /// one plan must not collide on this.
    pub fn scenario_identity(&self) -> String {
        format!(
            "{}-n{}-c{}-b{}-g{}",
            self.reference, self.n_train, self.censoring, self.beta_treatment, self.gamma_spec
        )
    }

    fn to_record(&self) -> Vec<String> {
        vec![
            self.reference.clone(),
            self.n_train.to_string(),
            fmt_f64(self.censoring),
            fmt_f64(self.beta_treatment),
            self.gamma_spec.clone(),
            self.method.clone(),
            self.replicate.to_string(),
            self.metric.clone(),
            self.value.map(fmt_f64).unwrap_or_default(),
            format!("{:.3}", self.fit_ms),
            format!("{:.3}", self.predict_ms),
            self.dropped.to_string(),
            self.drop_reason.clone(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<ResultRow> {
        if rec.len() != RESULT_COLUMNS.len() {
            return Err(Error::Data(format!(
                "results row has {} fields, expected {}",
                rec.len(),
                RESULT_COLUMNS.len()
            )));
        }
        let field = |i: usize| rec.get(i).unwrap().to_string();
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap()
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("bad number {:?} in results file", rec.get(i))))
        };
        let value = match rec.get(8).unwrap() {
            "" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad value {s:?} in results file")))?,
            ),
        };
        Ok(ResultRow {
            reference: field(0),
            n_train: num(1)? as usize,
            censoring: num(2)?,
            beta_treatment: num(3)?,
            gamma_spec: field(4),
            method: field(5),
            replicate: num(6)? as u64,
            metric: field(7),
            value,
            fit_ms: num(9)?,
            predict_ms: num(10)?,
            dropped: rec.get(11).unwrap() == "true",
            drop_reason: field(12),
        })
    }
}

/// Shortest round-trippable decimal form; stable under parse → reformat, so
/// resumed runs rewrite identical bytes.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn reference_id(r: Reference) -> &'static str {
    match r {
        Reference::Pbc => "pbc",
        Reference::Prostate => "prostate",
    }
}

/// Shape label: a single value for proportional hazards, `"c-t"` for
/// group-specific shapes.
pub fn gamma_spec_string(h: &HazardSpec) -> String {
    if h.is_proportional() {
        fmt_f64(h.gamma_control)
    } else {
        format!("{}-{}", fmt_f64(h.gamma_control), fmt_f64(h.gamma_treated))
    }
}

/// Human-readable scenario identity used in file names and row keys.
pub fn scenario_key(s: &ScenarioConfig) -> String {
    format!(
        "{}-n{}-c{}-b{}-g{}",
        reference_id(s.reference),
        s.n_train,
        fmt_f64(s.censoring_target),
        fmt_f64(s.beta_treatment),
        gamma_spec_string(&s.hazard)
    )
}

/// Load a reference dataset and fit the covariate generator on it.
pub fn load_reference_model(data_dir: &Path, reference: Reference) -> Result<CopulaModel> {
    let stem = reference_id(reference);
    let schema = DatasetSchema::from_file(data_dir.join(format!("{stem}.schema.json")))?;
    let ds = dataio::load_csv(data_dir.join(format!("{stem}.csv")), &schema)?;
    let ds = if ds.has_missing() { dataio::impute_column_means(&ds)? } else { ds };
    CopulaModel::fit(&ds, reference.treatment_name(), &DEFAULT_FAMILIES)
}

fn load_bounds(path: &Path) -> BTreeMap<String, f64> {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .unwrap_or_default()
}

fn save_bounds(path: &Path, bounds: &BTreeMap<String, f64>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(bounds)?;
    text.push('\n');
    replace_file(path, text.as_bytes())
}

/// Write `bytes` to `path` via a temporary file in the same directory plus a
/// rename, so readers (including a resumed run after a crash) never see a
/// half-written file.
fn replace_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a results file back into rows (used for resuming and for plots).
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(ResultRow::from_record(&rec?)?);
    }
    Ok(rows)
}

fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RESULT_COLUMNS)?;
    for row in rows {
        writer.write_record(row.to_record())?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    replace_file(path, &bytes)
}

/// One calibration grid point for the per-scenario sidecar files.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationRow {
    pub method: String,
    pub replicate: u64,
    pub t_star: f64,
    pub predicted: f64,
    pub observed: f64,
}

const CALIBRATION_COLUMNS: [&str; 5] = ["method", "replicate", "t_star", "predicted", "observed"];

pub fn calibration_sidecar_path(out_dir: &Path, scenario_key: &str) -> PathBuf {
    out_dir.join(format!("calibration_{scenario_key}.csv"))
}

pub fn read_calibration_rows(path: &Path) -> Result<Vec<CalibrationRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != CALIBRATION_COLUMNS.len() {
            return Err(Error::Data("malformed calibration sidecar row".into()));
        }
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap()
                .parse::<f64>()
                .map_err(|_| Error::Data("bad number in calibration sidecar".into()))
        };
        rows.push(CalibrationRow {
            method: rec.get(0).unwrap().to_string(),
            replicate: num(1)? as u64,
            t_star: num(2)?,
            predicted: num(3)?,
            observed: num(4)?,
        });
    }
    Ok(rows)
}

fn write_calibration_rows(path: &Path, rows: &[CalibrationRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CALIBRATION_COLUMNS)?;
    for r in rows {
        writer.write_record([
            r.method.clone(),
            r.replicate.to_string(),
            fmt_f64(r.t_star),
            fmt_f64(r.predicted),
            fmt_f64(r.observed),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    replace_file(path, &bytes)
}

enum FittedModel {
    Cox { model: CoxModel, selected: Vec<usize> },
    Forest(SurvivalForest),
}

impl FittedModel {
    fn risk_scores(&self, test: &SurvivalDataset) -> Result<Vec<f64>> {
        match self {
            FittedModel::Cox { model, selected } => {
                model.linear_predictors(&test.select_columns(selected).x)
            }
            FittedModel::Forest(forest) => (0..test.n())
                .map(|r| {
                    let chf = forest.predict_chf(test.x.row(r).to_slice().unwrap())?;
                    Ok(chf.iter().sum())
                })
                .collect(),
        }
    }

    fn survival_at(&self, test: &SurvivalDataset, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self {
            FittedModel::Cox { model, selected } => {
                let sub = test.select_columns(selected);
                let curves = model.survival_curves(&sub.x)?;
                Ok(times.iter().map(|&t| curves(t)).collect())
            }
            FittedModel::Forest(forest) => {
                let curves = forest.survival_curves(&test.x)?;
                Ok(times.iter().map(|&t| curves(t)).collect())
            }
        }
    }

    fn integrated_brier(&self, test: &SurvivalDataset) -> Result<f64> {
        let horizon = default_ibs_horizon(&test.time);
        match self {
            FittedModel::Cox { model, selected } => {
                let sub = test.select_columns(selected);
                let curves = model.survival_curves(&sub.x)?;
                integrated_brier(curves, &test.time, &test.status, horizon)
            }
            FittedModel::Forest(forest) => {
                let curves = forest.survival_curves(&test.x)?;
                integrated_brier(curves, &test.time, &test.status, horizon)
            }
        }
    }
}

fn fit_method(
    train: &SurvivalDataset,
    method: Method,
    tune_rsf: bool,
    scenario_seed: u64,
    replicate: u64,
) -> Result<FittedModel> {
    match method {
        Method::Cox => {
            let candidates: Vec<usize> = (1..train.d()).collect();
            let step =
                coxph::stepwise(train, &candidates, Criterion::Aic, &[0], &CoxOptions::default())?;
            Ok(FittedModel::Cox { model: step.model, selected: step.selected })
        }
        Method::Rsf(rule) => {
            let d = train.d();
            let mut base = ForestParams::default_for(d);
            base.rule = rule;
            base.seed = stream_key(scenario_seed, replicate, &method.id());
            let params = if tune_rsf {
                tune_grid(train, &default_grid(&base, d))?.0
            } else {
                base
            };
            Ok(FittedModel::Forest(grow_forest(train, &params)?))
        }
    }
}

struct TaskOutput {
    /// One row per plan metric, in plan-metric order.
    rows: Vec<ResultRow>,
    cal: Vec<CalibrationRow>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Grid size of the per-replicate calibration curves.
pub const CALIBRATION_GRID: usize = 20;

fn run_task(
    scenario: &ScenarioConfig,
    model: &CopulaModel,
    censor_bound: f64,
    method: Method,
    metrics: &[PlanMetric],
    tune_rsf: bool,
    replicate: u64,
) -> TaskOutput {
    let blank = |metric: PlanMetric| ResultRow {
        reference: reference_id(scenario.reference).to_string(),
        n_train: scenario.n_train,
        censoring: scenario.censoring_target,
        beta_treatment: scenario.beta_treatment,
        gamma_spec: gamma_spec_string(&scenario.hazard),
        method: method.id(),
        replicate,
        metric: metric.id().to_string(),
        value: None,
        fit_ms: 0.0,
        predict_ms: 0.0,
        dropped: false,
        drop_reason: String::new(),
    };
    let drop_all = |reason: String, fit_ms: f64| TaskOutput {
        rows: metrics
            .iter()
            .map(|&m| {
                let mut row = blank(m);
                row.dropped = true;
                row.drop_reason = reason.clone();
                row.fit_ms = fit_ms;
                row
            })
            .collect(),
        cal: Vec::new(),
    };

    let (train, test) = match generate_dataset(scenario, model, censor_bound, replicate) {
        Ok(pair) => pair,
        Err(e) => return drop_all(format!("data generation: {e}"), 0.0),
    };

    let fit_start = Instant::now();
    let fitted = match fit_method(&train, method, tune_rsf, scenario.seed, replicate) {
        Ok(f) => f,
        Err(e) => return drop_all(format!("fit: {e}"), ms_since(fit_start)),
    };
    let fit_ms = ms_since(fit_start);

    let predict_start = Instant::now();
    let mut rows = Vec::with_capacity(metrics.len());
    let mut cal = Vec::new();
    for &metric in metrics {
        let mut row = blank(metric);
        row.fit_ms = fit_ms;
        let outcome: Result<f64> = match metric {
            PlanMetric::CIndex => fitted
                .risk_scores(&test)
                .and_then(|risk| harrell_c(&risk, &test.time, &test.status)),
            PlanMetric::Ibs => fitted.integrated_brier(&test),
            PlanMetric::Calibration => (|| {
                let t_star = median(&test.time);
                let surv = fitted.survival_at(&test, &[t_star])?;
                let mort: Vec<f64> =
                    surv[0].iter().map(|&s| (1.0 - s).clamp(1e-9, 1.0 - 1e-9)).collect();
                let curve =
                    calibration_curve(&mort, &test.time, &test.status, t_star, CALIBRATION_GRID)?;
                for (p, o) in curve.predicted.iter().zip(&curve.observed) {
                    cal.push(CalibrationRow {
                        method: method.id(),
                        replicate,
                        t_star,
                        predicted: *p,
                        observed: *o,
                    });
                }
                let mad = curve
                    .predicted
                    .iter()
                    .zip(&curve.observed)
                    .map(|(p, o)| (p - o).abs())
                    .sum::<f64>()
                    / curve.predicted.len() as f64;
                Ok(mad)
            })(),
        };
        match outcome {
            Ok(v) => row.value = Some(v),
            Err(e) => {
                row.dropped = true;
                row.drop_reason = format!("{}: {e}", metric.id());
            }
        }
        rows.push(row);
    }
    let predict_ms = ms_since(predict_start);
    for row in &mut rows {
        row.predict_ms = predict_ms;
    }
    TaskOutput { rows, cal }
}

struct Task {
    si: usize,
    mi: usize,
    rep: u64,
}

/// Run (or resume) a plan, writing `results.csv`, the censoring-bound cache,
/// and per-scenario calibration sidecars into `out_dir`. Returns the path of
/// the results file and the number of tasks actually computed this call.
pub fn run_scenarios(plan: &ExperimentPlan, out_dir: &Path) -> Result<(PathBuf, usize)> {
    plan.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let scenarios = plan.effective_scenarios();
    let keys: Vec<String> = scenarios.iter().map(scenario_key).collect();
    {
        let mut seen = HashSet::new();
        for k in &keys {
            if !seen.insert(k.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "two scenarios share the results identity {k:?}; they would be \
                     indistinguishable in the output table"
                )));
            }
        }
    }

    let mut models: HashMap<&'static str, CopulaModel> = HashMap::new();
    for s in &scenarios {
        let id = reference_id(s.reference);
        if !models.contains_key(id) {
            models.insert(id, load_reference_model(&plan.data_dir, s.reference)?);
        }
    }

    // Censoring bounds are calibrated once per generating mechanism on a
    // large pilot sample and cached on disk for resumed runs.
    let bounds_path = out_dir.join("censor_bounds.json");
    let mut bounds = load_bounds(&bounds_path);
    let mut bounds_dirty = false;
    let mut scenario_bounds = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let key = s.mechanism_key();
        let bound = match bounds.get(&key) {
            Some(&b) => b,
            None => {
                let mut rng = derive_stream(s.seed, 0, "censor-pilot");
                let b = calibrate_censoring_bound(s, &models[reference_id(s.reference)], &mut rng)?;
                bounds.insert(key, b);
                bounds_dirty = true;
                b
            }
        };
        scenario_bounds.push(bound);
    }
    if bounds_dirty {
        save_bounds(&bounds_path, &bounds)?;
    }

    let scen_index: HashMap<&str, usize> =
        keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let method_ids: Vec<String> = plan.methods.iter().map(|m| m.id()).collect();
    let method_index: HashMap<&str, usize> =
        method_ids.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let metric_index: HashMap<&str, usize> =
        plan.metrics.iter().enumerate().map(|(i, m)| (m.id(), i)).collect();

    // Resume: keep rows that still belong to the plan; recompute the rest.
    let results_path = out_dir.join("results.csv");
    let mut kept: HashMap<(usize, usize, u64, usize), ResultRow> = HashMap::new();
    if results_path.exists() {
        for row in read_results(&results_path)? {
            let identity = row.scenario_identity();
            if let (Some(&si), Some(&mi), Some(&ki)) = (
                scen_index.get(identity.as_str()),
                method_index.get(row.method.as_str()),
                metric_index.get(row.metric.as_str()),
            ) {
                if (row.replicate as usize) < scenarios[si].n_sim {
                    kept.insert((si, mi, row.replicate, ki), row);
                }
            }
        }
    }

    let mut tasks = Vec::new();
    for si in 0..scenarios.len() {
        for mi in 0..plan.methods.len() {
            for rep in 0..scenarios[si].n_sim as u64 {
                let complete =
                    (0..plan.metrics.len()).all(|ki| kept.contains_key(&(si, mi, rep, ki)));
                if !complete {
                    tasks.push(Task { si, mi, rep });
                }
            }
        }
    }
    let computed = tasks.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;

    // Calibration sidecar bookkeeping: per scenario, the set of (method,
    // replicate) curves this run recomputes — fixed by the task list before
    // anything executes — and the rows carried over from a previous run.
    let mut recomputed: Vec<HashSet<(String, u64)>> = vec![HashSet::new(); scenarios.len()];
    for t in &tasks {
        recomputed[t.si].insert((method_ids[t.mi].clone(), t.rep));
    }
    let write_cal = plan.metrics.contains(&PlanMetric::Calibration);
    let mut base_cal: Vec<Vec<CalibrationRow>> = vec![Vec::new(); scenarios.len()];
    if write_cal {
        for (si, key) in keys.iter().enumerate() {
            let path = calibration_sidecar_path(out_dir, key);
            if path.exists() {
                base_cal[si] = read_calibration_rows(&path)?
                    .into_iter()
                    .filter(|r| {
                        method_index.contains_key(r.method.as_str())
                            && (r.replicate as usize) < scenarios[si].n_sim
                            && !recomputed[si].contains(&(r.method.clone(), r.replicate))
                    })
                    .collect();
            }
        }
    }
    let mut new_cal: Vec<Vec<CalibrationRow>> = vec![Vec::new(); scenarios.len()];

    // Tasks run in fixed-size batches, checkpointing the output files after
    // each, so an interrupted long run resumes from the last completed batch
    // instead of from scratch. Batching cannot affect the final contents:
    // the row set is determined by the task list alone.
    let batch_size = CHECKPOINT_TASKS.max(tasks.len() / MAX_CHECKPOINTS).max(1);
    let flush_results = |kept: &HashMap<(usize, usize, u64, usize), ResultRow>| -> Result<()> {
        let mut ordered: Vec<(&(usize, usize, u64, usize), &ResultRow)> = kept.iter().collect();
        ordered.sort_by_key(|(k, _)| **k);
        let rows: Vec<ResultRow> = ordered.into_iter().map(|(_, r)| r.clone()).collect();
        write_results(&results_path, &rows)
    };
    let flush_cal = |new_cal: &[Vec<CalibrationRow>]| -> Result<()> {
        for (si, key) in keys.iter().enumerate() {
            let path = calibration_sidecar_path(out_dir, key);
            let mut rows: Vec<CalibrationRow> =
                base_cal[si].iter().chain(new_cal[si].iter()).cloned().collect();
            rows.sort_by(|a, b| {
                (method_index[a.method.as_str()], a.replicate)
                    .cmp(&(method_index[b.method.as_str()], b.replicate))
                    .then(a.predicted.total_cmp(&b.predicted))
            });
            if !rows.is_empty() || path.exists() {
                write_calibration_rows(&path, &rows)?;
            }
        }
        Ok(())
    };
    for batch in tasks.chunks(batch_size) {
        let outputs: Vec<TaskOutput> = pool.install(|| {
            batch
                .par_iter()
                .map(|t| {
                    let s = &scenarios[t.si];
                    run_task(
                        s,
                        &models[reference_id(s.reference)],
                        scenario_bounds[t.si],
                        plan.methods[t.mi],
                        &plan.metrics,
                        plan.tune_rsf,
                        t.rep,
                    )
                })
                .collect()
        });
        for (t, out) in batch.iter().zip(outputs) {
            new_cal[t.si].extend(out.cal);
            for (ki, row) in out.rows.into_iter().enumerate() {
                kept.insert((t.si, t.mi, t.rep, ki), row);
            }
        }
        // Sidecars first: if the run dies between the two writes, the rows
        // missing from the results file are recomputed on resume and their
        // curves rewritten, whereas the reverse order would strand results
        // rows whose curves were never persisted.
        if write_cal {
            flush_cal(&new_cal)?;
        }
        flush_results(&kept)?;
    }
    if tasks.is_empty() {
        if write_cal {
            flush_cal(&new_cal)?;
        }
        flush_results(&kept)?;
    }

    Ok((results_path, computed))
}
