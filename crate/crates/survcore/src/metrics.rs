//! Discrimination, calibration, and overall-performance measures for
//! survival predictions, plus the Kaplan–Meier / Nelson–Aalen estimators
//! they depend on.

use crate::coxph::{self, CoxOptions};
use crate::dataio::SurvivalDataset;
use crate::util::quantile_of;
use crate::{Error, Result};
use ndarray::Array2;

/// Right-continuous piecewise-constant function of time.
///
/// `values[i]` applies on `[knots[i], knots[i+1])`; `left` applies before the
/// first knot. Survival-type instances are nonincreasing in [0,1],
/// hazard-type instances nondecreasing and ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub left: f64,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, left: f64) -> Self {
        assert_eq!(knots.len(), values.len(), "knots/values length mismatch");
        assert!(
            knots.windows(2).all(|w| w[0] < w[1]),
            "knots must be strictly increasing"
        );
        StepFunction { knots, values, left }
    }

    /// Constant function with no knots.
    pub fn constant(value: f64) -> Self {
        StepFunction { knots: vec![], values: vec![], left: value }
    }

    /// Value at `t` (right-continuous: the knot at `t` counts).
    pub fn eval(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k <= t) {
            0 => self.left,
            i => self.values[i - 1],
        }
    }

    /// Left limit at `t`: the value just before `t` (the knot at `t` does
    /// not count).
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k < t) {
            0 => self.left,
            i => self.values[i - 1],
        }
    }
}

fn check_surv_inputs(time: &[f64], status: &[u8]) {
    assert_eq!(time.len(), status.len(), "time/status length mismatch");
    assert!(!time.is_empty(), "empty survival sample");
    assert!(status.iter().all(|&s| s <= 1), "status must be 0/1");
}

/// Indices ordered by time; within a tie group order is by original index
/// (stable), which no estimator below depends on.
fn time_order(time: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..time.len()).collect();
    idx.sort_by(|&a, &b| time[a].partial_cmp(&time[b]).unwrap());
    idx
}

/// Kaplan–Meier product-limit estimator of the event-time survival function.
///
/// Jumps only at observed event times. The censoring-distribution variant is
/// [`km_censoring`], obtained by swapping the status coding.
pub fn km_estimator(time: &[f64], status: &[u8]) -> StepFunction {
    check_surv_inputs(time, status);
    let order = time_order(time);
    let n = time.len();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut surv = 1.0;
    let mut i = 0;
    let mut at_risk = n;
    while i < n {
        let t = time[order[i]];
        let mut j = i;
        let mut d = 0usize;
        while j < n && time[order[j]] == t {
            if status[order[j]] == 1 {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            surv *= 1.0 - d as f64 / at_risk as f64;
            knots.push(t);
            values.push(surv);
        }
        at_risk -= j - i;
        i = j;
    }
    StepFunction { knots, values, left: 1.0 }
}

/// Kaplan–Meier estimator of the censoring distribution G(t)
/// (status coding swapped: censorings are the "events").
pub fn km_censoring(time: &[f64], status: &[u8]) -> StepFunction {
    let flipped: Vec<u8> = status.iter().map(|&s| 1 - s).collect();
    km_estimator(time, &flipped)
}

/// Nelson–Aalen estimator of the cumulative hazard H(t).
pub fn nelson_aalen(time: &[f64], status: &[u8]) -> StepFunction {
    check_surv_inputs(time, status);
    let order = time_order(time);
    let n = time.len();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut haz = 0.0;
    let mut i = 0;
    let mut at_risk = n;
    while i < n {
        let t = time[order[i]];
        let mut j = i;
        let mut d = 0usize;
        while j < n && time[order[j]] == t {
            if status[order[j]] == 1 {
                d += 1;
            }
            j += 1;
        }
        if d > 0 {
            haz += d as f64 / at_risk as f64;
            knots.push(t);
            values.push(haz);
        }
        at_risk -= j - i;
        i = j;
    }
    StepFunction { knots, values, left: 0.0 }
}

/// Harrell's concordance index.
///
/// A pair (i, j) is comparable iff the times differ and the subject with the
/// smaller time has status 1. The pair is concordant if that subject has the
/// strictly higher risk; prediction ties count 0.5. Returns
/// concordant / comparable.
pub fn harrell_c(risk: &[f64], time: &[f64], status: &[u8]) -> Result<f64> {
    check_surv_inputs(time, status);
    assert_eq!(risk.len(), time.len(), "risk length mismatch");
    let n = time.len();
    let mut comparable = 0u64;
    let mut concordant = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (early, late) = if time[i] < time[j] {
                (i, j)
            } else if time[j] < time[i] {
                (j, i)
            } else {
                continue;
            };
            if status[early] != 1 {
                continue;
            }
            comparable += 1;
            if risk[early] > risk[late] {
                concordant += 1.0;
            } else if risk[early] == risk[late] {
                concordant += 0.5;
            }
        }
    }
    if comparable == 0 {
        return Err(Error::Degenerate("no comparable pairs".into()));
    }
    Ok(concordant / comparable as f64)
}

/// IPCW Brier score at horizon `t`.
///
/// BS(t) = (1/n) Σ [ Sᵢ(t)²·1{Tᵢ ≤ t, δᵢ = 1}/G(Tᵢ⁻)
///                 + (1 − Sᵢ(t))²·1{Tᵢ > t}/G(t) ].
/// Subjects censored before `t` contribute 0. `pred_surv[i]` is the model's
/// predicted S(t) for subject i; `censor_surv` is the censoring-distribution
/// Kaplan–Meier G.
pub fn brier_score(
    pred_surv: &[f64],
    time: &[f64],
    status: &[u8],
    t: f64,
    censor_surv: &StepFunction,
) -> Result<f64> {
    check_surv_inputs(time, status);
    assert_eq!(pred_surv.len(), time.len(), "prediction length mismatch");
    let n = time.len();
    let g_t = censor_surv.eval(t);
    let mut total = 0.0;
    for i in 0..n {
        if time[i] <= t && status[i] == 1 {
            let g = censor_surv.eval_left(time[i]);
            if g <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "zero censoring-survival weight at event time {}",
                    time[i]
                )));
            }
            total += pred_surv[i] * pred_surv[i] / g;
        } else if time[i] > t {
            if g_t <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "zero censoring-survival weight at horizon {t}"
                )));
            }
            let d = 1.0 - pred_surv[i];
            total += d * d / g_t;
        }
    }
    Ok(total / n as f64)
}

/// Integrated Brier score over [0, t_max] by the trapezoid rule on the
/// sorted unique test event times plus {0, t_max}, normalized by t_max.
///
/// `surv_at(t)` returns every subject's predicted S(t). The censoring
/// distribution G is estimated once from the test set given here.
pub fn integrated_brier(
    mut surv_at: impl FnMut(f64) -> Vec<f64>,
    time: &[f64],
    status: &[u8],
    t_max: f64,
) -> Result<f64> {
    check_surv_inputs(time, status);
    if !(t_max > 0.0) {
        return Err(Error::InvalidArgument(format!("t_max = {t_max} must be positive")));
    }
    let censor = km_censoring(time, status);
    let mut grid: Vec<f64> = vec![0.0];
    let mut events: Vec<f64> = time
        .iter()
        .zip(status)
        .filter(|&(&t, &s)| s == 1 && t < t_max)
        .map(|(&t, _)| t)
        .collect();
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup();
    grid.extend(events);
    grid.push(t_max);

    let mut integral = 0.0;
    let mut prev_t = grid[0];
    let mut prev_bs = brier_score(&surv_at(prev_t), time, status, prev_t, &censor)?;
    for &t in &grid[1..] {
        let bs = brier_score(&surv_at(t), time, status, t, &censor)?;
        integral += (t - prev_t) * (bs + prev_bs) / 2.0;
        prev_t = t;
        prev_bs = bs;
    }
    Ok(integral / t_max)
}

/// Default IBS horizon: the 95th percentile of observed test times, which
/// keeps the 1/G(t) weights bounded near the end of follow-up.
pub fn default_ibs_horizon(time: &[f64]) -> f64 {
    quantile_of(time, 0.95)
}

/// Observed-vs-predicted calibration curve at a fixed horizon.
#[derive(Debug, Clone)]
pub struct CalibrationCurve {
    /// Grid of predicted mortality probabilities (strictly increasing).
    pub predicted: Vec<f64>,
    /// Model-free observed mortality at the same probabilities.
    pub observed: Vec<f64>,
    /// Evaluation horizon t*.
    pub t_star: f64,
}

/// ln(−ln(1 − p)): the complementary log-log link used to linearize
/// mortality probabilities before the spline fit.
fn cloglog(p: f64) -> f64 {
    (-(1.0 - p).ln()).ln()
}

/// Restricted cubic spline basis with 3 knots: returns (x, nonlinear term).
/// Linear beyond the boundary knots, standard truncated-power construction.
fn rcs3(x: f64, k: (f64, f64, f64)) -> (f64, f64) {
    let (k1, k2, k3) = k;
    let scale = (k3 - k1) * (k3 - k1);
    let p3 = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
    let term = p3(x - k1) - p3(x - k2) * (k3 - k1) / (k3 - k2) + p3(x - k3) * (k2 - k1) / (k3 - k2);
    (x, term / scale)
}

/// Calibration curve via a secondary Cox regression of the test outcomes on
/// a restricted cubic spline (3 knots at the 10th/50th/90th percentiles) of
/// cloglog(predicted mortality). Observed probability at grid point p is
/// 1 − Ŝ_secondary(t* | basis(p)); the grid is `grid_size` equally spaced
/// quantiles of the predictions.
pub fn calibration_curve(
    pred_mort: &[f64],
    time: &[f64],
    status: &[u8],
    t_star: f64,
    grid_size: usize,
) -> Result<CalibrationCurve> {
    check_surv_inputs(time, status);
    assert_eq!(pred_mort.len(), time.len(), "prediction length mismatch");
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    if pred_mort.iter().any(|&p| !(0.0..1.0).contains(&p) || p == 0.0) {
        return Err(Error::InvalidArgument(
            "predicted mortalities must lie strictly inside (0,1)".into(),
        ));
    }
    let events_by_t = time
        .iter()
        .zip(status)
        .filter(|&(&t, &s)| s == 1 && t <= t_star)
        .count();
    if events_by_t < 10 {
        return Err(Error::Degenerate(format!(
            "only {events_by_t} events by t* = {t_star}; need at least 10"
        )));
    }

    let z: Vec<f64> = pred_mort.iter().map(|&p| cloglog(p)).collect();
    let k1 = quantile_of(&z, 0.10);
    let k2 = quantile_of(&z, 0.50);
    let k3 = quantile_of(&z, 0.90);
    if !(k1 < k2 && k2 < k3) {
        return Err(Error::Degenerate(
            "degenerate prediction spread: spline knots are not distinct".into(),
        ));
    }

    let n = z.len();
    let mut x = Array2::zeros((n, 2));
    for (i, &zi) in z.iter().enumerate() {
        let (a, b) = rcs3(zi, (k1, k2, k3));
        x[[i, 0]] = a;
        x[[i, 1]] = b;
    }
    let ds = SurvivalDataset::from_parts(
        vec!["rcs1".into(), "rcs2".into()],
        x,
        time.to_vec(),
        status.to_vec(),
    )?;
    let model = coxph::fit(&ds, &CoxOptions::default())?;

    let mut levels: Vec<f64> = (1..=grid_size)
        .map(|i| quantile_of(pred_mort, i as f64 / (grid_size + 1) as f64))
        .collect();
    levels.dedup();
    if levels.len() < 2 {
        return Err(Error::Degenerate(
            "degenerate prediction spread: all predictions effectively equal".into(),
        ));
    }

    let mut observed = Vec::with_capacity(levels.len());
    for &p in &levels {
        let (a, b) = rcs3(cloglog(p), (k1, k2, k3));
        let s = model.predict_survival(&[a, b], t_star)?;
        observed.push(1.0 - s);
    }
    Ok(CalibrationCurve { predicted: levels, observed, t_star })
}
