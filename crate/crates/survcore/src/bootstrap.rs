//! .632+ bootstrap internal validation.
//!
//! The point estimate blends apparent performance (train = test = the
//! original data) with the mean out-of-bag performance over B
//! with-replacement resamples, weighted by the estimated degree of
//! overfitting. Confidence intervals come from the empirical distribution of
//! the per-replicate weights w_b = θ_b^{boot,boot} − θ^{orig,orig}; the
//! interval is formed exactly as
//! [θ̂ − ξ_{1−α/2}, θ̂ + ξ_{α/2}], which can come out inverted when the
//! weight distribution is shifted, so the result also carries min/max-ordered
//! bounds and a flag instead of silently reordering.

use std::collections::BTreeMap;

use crate::coxph::{self, CoxModel, CoxOptions};
use crate::dataio::SurvivalDataset;
use crate::metrics::{default_ibs_horizon, harrell_c, integrated_brier};
use crate::rng::{derive_stream, stream_key};
use crate::rsf::{grow_forest, ForestParams, SurvivalForest};
use crate::util::{compensated_sum, quantile_type7};
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Two-sided confidence level used by `run_bootstrap` (95% intervals).
pub const DEFAULT_ALPHA: f64 = 0.05;

/// No-information performance of the concordance index.
pub const NOINFO_C: f64 = 0.5;

/// No-information performance of the integrated Brier score.
pub const NOINFO_IBS: f64 = 0.75;

/// Replicate-drop budget: exceeding this fraction aborts the run.
pub const MAX_DROP_FRACTION: f64 = 0.2;

/// Performance measure validated by the bootstrap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CIndex,
    Ibs,
}

impl Metric {
    pub fn id(self) -> &'static str {
        match self {
            Metric::CIndex => "c_index",
            Metric::Ibs => "ibs",
        }
    }

    /// Performance of a model that carries no information.
    pub fn noinfo(self) -> f64 {
        match self {
            Metric::CIndex => NOINFO_C,
            Metric::Ibs => NOINFO_IBS,
        }
    }
}

/// Model family (with its options) to validate.
#[derive(Clone, Debug)]
pub enum ModelSpec {
    Cox(CoxOptions),
    Rsf(ForestParams),
}

enum Fitted {
    Cox(CoxModel),
    Rsf(SurvivalForest),
}

impl ModelSpec {
    /// Fit on `ds`. Forest growth inside a bootstrap replicate gets its own
    /// derived seed so replicates stay independent and reproducible.
    fn fit(&self, ds: &SurvivalDataset, seed_override: Option<u64>) -> Result<Fitted> {
        match self {
            ModelSpec::Cox(options) => Ok(Fitted::Cox(coxph::fit(ds, options)?)),
            ModelSpec::Rsf(params) => {
                let mut params = params.clone();
                if let Some(seed) = seed_override {
                    params.seed = seed;
                }
                Ok(Fitted::Rsf(grow_forest(ds, &params)?))
            }
        }
    }
}

impl Fitted {
    /// Scalar risk score per row: Cox linear predictor, or forest ensemble
    /// mortality (sum of the predicted CHF over the forest grid).
    fn risk_scores(&self, ds: &SurvivalDataset) -> Result<Vec<f64>> {
        match self {
            Fitted::Cox(model) => model.linear_predictors(&ds.x),
            Fitted::Rsf(forest) => (0..ds.n())
                .map(|i| {
                    let row = ds.x.row(i);
                    let chf = forest.predict_chf(row.to_slice().unwrap())?;
                    Ok(chf.iter().sum())
                })
                .collect(),
        }
    }

    fn metric_value(&self, eval: &SurvivalDataset, metric: Metric, horizon: f64) -> Result<f64> {
        match metric {
            Metric::CIndex => {
                let risk = self.risk_scores(eval)?;
                harrell_c(&risk, &eval.time, &eval.status)
            }
            Metric::Ibs => match self {
                Fitted::Cox(model) => {
                    let curves = model.survival_curves(&eval.x)?;
                    integrated_brier(curves, &eval.time, &eval.status, horizon)
                }
                Fitted::Rsf(forest) => {
                    let curves = forest.survival_curves(&eval.x)?;
                    integrated_brier(curves, &eval.time, &eval.status, horizon)
                }
            },
        }
    }
}

/// Result of one .632+ bootstrap validation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub metric: Metric,
    pub theta_632plus: f64,
    /// Interval bounds ordered min/max; `ci_inverted` records whether the
    /// as-written formula produced them in reversed order.
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_inverted: bool,
    pub alpha: f64,
    /// θ^{orig,orig}: performance with train = test = original data.
    pub apparent: f64,
    /// θ^{bootstrap,OOB}: mean held-out performance across replicates.
    pub oob_mean: f64,
    /// Relative overfitting, clipped to [0,1].
    pub r: f64,
    /// Blending weight w = 0.632 / (1 − 0.368·R) ∈ [0.632, 1].
    pub w: f64,
    pub noinfo: f64,
    /// w_b = θ_b^{boot,boot} − apparent for each surviving replicate.
    pub per_replicate_weights: Vec<f64>,
    /// Requested replicate count.
    pub b: usize,
    pub dropped: usize,
    /// Most frequent failure among dropped replicates, if any.
    pub drop_reason: Option<String>,
}

/// The .632+ blend: R = (oob_mean − apparent)/(noinfo − apparent) clipped to
/// [0,1] (0 when the denominator vanishes), w = 0.632/(1 − 0.368·R),
/// theta = (1 − w)·apparent + w·oob_mean. The same orientation works for
/// both larger-is-better and smaller-is-better metrics as long as `noinfo`
/// sits on the no-skill side of `apparent`.
pub fn dot632plus(apparent: f64, oob_mean: f64, noinfo: f64) -> Result<(f64, f64, f64)> {
    if !apparent.is_finite() || !oob_mean.is_finite() || !noinfo.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite inputs: apparent={apparent}, oob_mean={oob_mean}, noinfo={noinfo}"
        )));
    }
    let denom = noinfo - apparent;
    let r = if denom == 0.0 { 0.0 } else { ((oob_mean - apparent) / denom).clamp(0.0, 1.0) };
    let w = 0.632 / (1.0 - 0.368 * r);
    let theta = (1.0 - w) * apparent + w * oob_mean;
    Ok((r, w, theta))
}

/// Confidence interval from the per-replicate weights, exactly as written:
/// (θ − ξ_{1−α/2}, θ + ξ_{α/2}) with type-7 empirical quantiles ξ. The
/// bounds are returned in formula order; callers that need an ordered
/// interval must sort them (see `BootstrapResult::ci_inverted`).
pub fn bootstrap_ci(theta: f64, weights: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if weights.is_empty() {
        return Err(Error::InvalidArgument("no bootstrap weights given".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let mut sorted = weights.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let xi_hi = quantile_type7(&sorted, 1.0 - alpha / 2.0);
    let xi_lo = quantile_type7(&sorted, alpha / 2.0);
    Ok((theta - xi_hi, theta + xi_lo))
}

fn check_drop_budget(dropped: usize, total: usize, reason: Option<&str>) -> Result<()> {
    if (dropped as f64) > MAX_DROP_FRACTION * total as f64 {
        return Err(Error::TooManyDropped {
            dropped,
            total,
            reason: reason.unwrap_or("unknown").to_string(),
        });
    }
    Ok(())
}

/// Rows of `ds` at `rows` (with repetition allowed), preserving column
/// metadata.
fn subset_rows(ds: &SurvivalDataset, rows: &[usize]) -> Result<SurvivalDataset> {
    let d = ds.d();
    let mut x = ndarray::Array2::<f64>::zeros((rows.len(), d));
    let mut time = Vec::with_capacity(rows.len());
    let mut status = Vec::with_capacity(rows.len());
    for (out, &i) in rows.iter().enumerate() {
        for j in 0..d {
            x[[out, j]] = ds.x[[i, j]];
        }
        time.push(ds.time[i]);
        status.push(ds.status[i]);
    }
    let names = ds.columns.iter().map(|c| c.name.clone()).collect();
    let mut sub = SurvivalDataset::from_parts(names, x, time, status)?;
    sub.columns = ds.columns.clone();
    Ok(sub)
}

/// Full .632+ validation of one (model, metric) pair on one dataset.
///
/// Per replicate b: draw an n-with-replacement resample on a stream derived
/// from (seed, b), fit the model on it, evaluate on the resample itself
/// (θ_b^{boot,boot}) and on the held-out rows (θ_b^{boot,OOB}) through the
/// model's ordinary prediction pathway. Replicates whose fit or either
/// evaluation fails (no events, no comparable pairs, degenerate weights, …)
/// are dropped and counted; more than 20% drops aborts the run. The IBS
/// horizon is fixed once from the full dataset (95th percentile of observed
/// times) so apparent and replicate values integrate over the same range.
pub fn run_bootstrap(
    ds: &SurvivalDataset,
    model_spec: &ModelSpec,
    metric: Metric,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicates, got {b}")));
    }
    let n = ds.n();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 rows, got {n}")));
    }
    let horizon = default_ibs_horizon(&ds.time);
    let full = model_spec.fit(ds, None)?;
    let apparent = full.metric_value(ds, metric, horizon)?;

    let mut weights = Vec::with_capacity(b);
    let mut oob_values = Vec::with_capacity(b);
    let mut dropped = 0usize;
    let mut reasons: BTreeMap<String, usize> = BTreeMap::new();

    for rep in 0..b {
        let mut rng = derive_stream(seed, rep as u64, "boot-resample");
        let resample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut in_bag = vec![false; n];
        for &i in &resample {
            in_bag[i] = true;
        }
        let held: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();

        let outcome = (|| -> Result<(f64, f64)> {
            if held.len() < 2 {
                return Err(Error::Degenerate(format!(
                    "held-out set has {} rows",
                    held.len()
                )));
            }
            let train = subset_rows(ds, &resample)?;
            let fitted =
                model_spec.fit(&train, Some(stream_key(seed, rep as u64, "boot-forest")))?;
            let theta_bb = fitted.metric_value(&train, metric, horizon)?;
            let eval = subset_rows(ds, &held)?;
            let theta_oob = fitted.metric_value(&eval, metric, horizon)?;
            Ok((theta_bb, theta_oob))
        })();

        match outcome {
            Ok((theta_bb, theta_oob)) => {
                weights.push(theta_bb - apparent);
                oob_values.push(theta_oob);
            }
            Err(e) => {
                dropped += 1;
                *reasons.entry(e.to_string()).or_insert(0) += 1;
            }
        }
    }

    let top_reason = reasons
        .iter()
        .max_by_key(|(_, count)| **count)
        .map(|(reason, _)| reason.clone());
    check_drop_budget(dropped, b, top_reason.as_deref())?;

    let oob_mean = compensated_sum(oob_values.iter().copied()) / oob_values.len() as f64;
    let noinfo = metric.noinfo();
    let (r, w, theta) = dot632plus(apparent, oob_mean, noinfo)?;
    let (lo, hi) = bootstrap_ci(theta, &weights, DEFAULT_ALPHA)?;
    let ci_inverted = lo > hi;
    Ok(BootstrapResult {
        metric,
        theta_632plus: theta,
        ci_low: lo.min(hi),
        ci_high: lo.max(hi),
        ci_inverted,
        alpha: DEFAULT_ALPHA,
        apparent,
        oob_mean,
        r,
        w,
        noinfo,
        per_replicate_weights: weights,
        b,
        dropped,
        drop_reason: top_reason,
    })
}
