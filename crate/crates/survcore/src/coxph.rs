//! Cox proportional-hazards regression.
//!
//! Fitting maximizes the partial likelihood by Newton–Raphson with
//! step-halving, using either the Efron (default) or Breslow correction for
//! tied event times. Covariates are centered and scaled internally for
//! numerical stability; reported coefficients, covariance and baseline are
//! on the original covariate scale.

use crate::dataio::SurvivalDataset;
use crate::metrics::{km_estimator, StepFunction};
use crate::util::{cholesky, chol_inverse, chol_solve};
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ties {
    Efron,
    Breslow,
}

#[derive(Debug, Clone)]
pub struct CoxOptions {
    pub ties: Ties,
    pub max_iter: usize,
    /// Convergence on the score: max |U_j| < tol in standardized covariate
    /// units (fallback: relative log-likelihood change < 1e-12).
    pub tol: f64,
    /// Optional starting coefficients (original covariate scale).
    pub init: Option<Vec<f64>>,
}

impl Default for CoxOptions {
    fn default() -> Self {
        CoxOptions { ties: Ties::Efron, max_iter: 60, tol: 1e-9, init: None }
    }
}

/// A fitted Cox model.
#[derive(Debug, Clone)]
pub struct CoxModel {
    pub names: Vec<String>,
    /// Coefficients (log hazard ratios) on the original covariate scale.
    pub beta: Array1<f64>,
    /// Estimated covariance of beta: inverse observed information.
    pub cov: Array2<f64>,
    /// Breslow cumulative baseline hazard H0(t), formed with covariates
    /// centered at the training means.
    pub baseline: StepFunction,
    /// Maximized partial log-likelihood.
    pub loglik: f64,
    pub ties: Ties,
    pub iterations: usize,
    pub converged: bool,
    /// Training covariate means used for centering.
    pub x_mean: Array1<f64>,
}

/// Time-ordered view of a dataset: unique times descending, with the rows
/// entering the risk set and the event rows at each time.
struct RiskGroups {
    /// (time, all rows with this time, event rows with this time), unique
    /// times in descending order.
    groups: Vec<(f64, Vec<usize>, Vec<usize>)>,
}

fn risk_groups(time: &[f64], status: &[u8]) -> RiskGroups {
    let mut idx: Vec<usize> = (0..time.len()).collect();
    idx.sort_by(|&a, &b| time[b].partial_cmp(&time[a]).unwrap());
    let mut groups: Vec<(f64, Vec<usize>, Vec<usize>)> = Vec::new();
    for &i in &idx {
        if groups.last().map(|g| g.0) != Some(time[i]) {
            groups.push((time[i], Vec::new(), Vec::new()));
        }
        let g = groups.last_mut().unwrap();
        g.1.push(i);
        if status[i] == 1 {
            g.2.push(i);
        }
    }
    RiskGroups { groups }
}

/// Partial log-likelihood, score and observed information at `beta`,
/// on the standardized covariate scale.
fn partial_lik(
    xs: &Array2<f64>,
    groups: &RiskGroups,
    beta: &Array1<f64>,
    ties: Ties,
) -> (f64, Array1<f64>, Array2<f64>) {
    let p = xs.ncols();
    let mut ll = 0.0;
    let mut grad = Array1::<f64>::zeros(p);
    let mut info = Array2::<f64>::zeros((p, p));
    let mut s0 = 0.0;
    let mut s1 = Array1::<f64>::zeros(p);
    let mut s2 = Array2::<f64>::zeros((p, p));

    for (_, members, events) in &groups.groups {
        for &i in members {
            let row = xs.row(i);
            let w = row.dot(beta).exp();
            s0 += w;
            for a in 0..p {
                let wa = w * row[a];
                s1[a] += wa;
                for b in a..p {
                    s2[[a, b]] += wa * row[b];
                }
            }
        }
        let d = events.len();
        if d == 0 {
            continue;
        }
        let mut sd0 = 0.0;
        let mut sd1 = Array1::<f64>::zeros(p);
        let mut sd2 = Array2::<f64>::zeros((p, p));
        for &i in events {
            let row = xs.row(i);
            let w = row.dot(beta).exp();
            ll += row.dot(beta);
            sd0 += w;
            for a in 0..p {
                grad[a] += row[a];
                let wa = w * row[a];
                sd1[a] += wa;
                for b in a..p {
                    sd2[[a, b]] += wa * row[b];
                }
            }
        }
        for l in 0..d {
            let f = match ties {
                Ties::Efron => l as f64 / d as f64,
                Ties::Breslow => 0.0,
            };
            let denom = s0 - f * sd0;
            ll -= denom.ln();
            for a in 0..p {
                let ma = (s1[a] - f * sd1[a]) / denom;
                grad[a] -= ma;
                for b in a..p {
                    let mb = (s1[b] - f * sd1[b]) / denom;
                    info[[a, b]] += (s2[[a, b]] - f * sd2[[a, b]]) / denom - ma * mb;
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[[a, b]] = info[[b, a]];
        }
    }
    (ll, grad, info)
}

struct Standardized {
    xs: Array2<f64>,
    mean: Array1<f64>,
    sd: Array1<f64>,
}

fn standardize(ds: &SurvivalDataset) -> Standardized {
    let n = ds.n();
    let p = ds.d();
    let mut mean = Array1::<f64>::zeros(p);
    let mut sd = Array1::<f64>::zeros(p);
    for c in 0..p {
        let col = ds.x.column(c);
        let m = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|&v| (v - m) * (v - m)).sum();
        let s = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        mean[c] = m;
        sd[c] = if s > 0.0 { s } else { 1.0 };
    }
    let mut xs = ds.x.clone();
    for c in 0..p {
        for r in 0..n {
            xs[[r, c]] = (xs[[r, c]] - mean[c]) / sd[c];
        }
    }
    Standardized { xs, mean, sd }
}

/// Fit a Cox model by Newton–Raphson on the partial likelihood.
pub fn fit(ds: &SurvivalDataset, options: &CoxOptions) -> Result<CoxModel> {
    let p = ds.d();
    if p == 0 {
        return Err(Error::InvalidArgument("no covariates".into()));
    }
    if ds.has_missing() {
        return Err(Error::Data("fit requires a fully observed dataset".into()));
    }
    if ds.n_events() == 0 {
        return Err(Error::Degenerate("no events in the data".into()));
    }
    let std = standardize(ds);
    let groups = risk_groups(&ds.time, &ds.status);

    let mut beta = match &options.init {
        Some(b0) => {
            if b0.len() != p {
                return Err(Error::InvalidArgument("init length mismatch".into()));
            }
            // convert to the standardized scale
            Array1::from_iter(b0.iter().zip(&std.sd).map(|(&b, &s)| b * s))
        }
        None => Array1::zeros(p),
    };

    let (mut ll, mut grad, mut info) = partial_lik(&std.xs, &groups, &beta, options.ties);
    if !ll.is_finite() {
        return Err(Error::NoConvergence("log-likelihood not finite at start".into()));
    }
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..options.max_iter {
        if grad.iter().all(|u| u.abs() < options.tol) {
            converged = true;
            break;
        }
        for (j, (&b, &s)) in beta.iter().zip(&std.sd).enumerate() {
            // the guard fires on either scale: standardized units catch
            // large-scale covariates whose raw coefficient grows slowly
            if b.abs() > 20.0 || (b / s).abs() > 20.0 {
                return Err(Error::MonotoneLikelihood { index: j, value: (b / s).abs().max(b.abs()) });
            }
        }
        let l = match cholesky(&info) {
            Some(l) => l,
            None => {
                let j = (0..p)
                    .find(|&c| info[[c, c]] <= 0.0 || !info[[c, c]].is_finite())
                    .unwrap_or(0);
                return Err(Error::SingularInformation(j));
            }
        };
        let delta = chol_solve(&l, &grad);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = &beta + &(&delta * step);
            let (ll_t, grad_t, info_t) = partial_lik(&std.xs, &groups, &trial, options.ties);
            if ll_t.is_finite() && ll_t >= ll - 1e-13 * (1.0 + ll.abs()) {
                let rel_change = (ll_t - ll).abs() / (1.0 + ll.abs());
                beta = trial;
                ll = ll_t;
                grad = grad_t;
                info = info_t;
                iterations += 1;
                accepted = true;
                if rel_change < 1e-12 {
                    converged = true;
                }
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            return Err(Error::NoConvergence(format!(
                "step-halving exhausted at iteration {iterations} (max |score| = {:.3e})",
                grad.iter().fold(0.0f64, |m, u| m.max(u.abs()))
            )));
        }
        if converged {
            break;
        }
    }
    if !converged && grad.iter().all(|u| u.abs() < options.tol) {
        converged = true;
    }
    if !converged {
        return Err(Error::NoConvergence(format!(
            "no convergence in {} iterations (max |score| = {:.3e})",
            options.max_iter,
            grad.iter().fold(0.0f64, |m, u| m.max(u.abs()))
        )));
    }

    let l = cholesky(&info).ok_or(Error::SingularInformation(0))?;
    let cov_std = chol_inverse(&l);
    // back-transform: beta_raw = beta_std / sd, cov_raw = D^-1 cov D^-1
    let beta_raw = Array1::from_iter(beta.iter().zip(&std.sd).map(|(&b, &s)| b / s));
    let mut cov = cov_std;
    for a in 0..p {
        for b in 0..p {
            cov[[a, b]] /= std.sd[a] * std.sd[b];
        }
    }
    let baseline = breslow_baseline(ds, beta_raw.as_slice().unwrap())?;
    Ok(CoxModel {
        names: ds.columns.iter().map(|c| c.name.clone()).collect(),
        beta: beta_raw,
        cov,
        baseline,
        loglik: ll,
        ties: options.ties,
        iterations,
        converged,
        x_mean: std.mean,
    })
}

/// Breslow estimator of the cumulative baseline hazard:
/// H0(t) = Σ_{event times t_k ≤ t} d_k / Σ_{j ∈ risk(t_k)} exp(βᵀ(x_j − x̄)).
pub fn breslow_baseline(ds: &SurvivalDataset, beta: &[f64]) -> Result<StepFunction> {
    if beta.len() != ds.d() {
        return Err(Error::InvalidArgument("beta length mismatch".into()));
    }
    let n = ds.n();
    let p = ds.d();
    let mut mean = vec![0.0; p];
    for c in 0..p {
        mean[c] = ds.x.column(c).sum() / n as f64;
    }
    let lp: Vec<f64> = (0..n)
        .map(|r| (0..p).map(|c| beta[c] * (ds.x[[r, c]] - mean[c])).sum::<f64>())
        .collect();
    let groups = risk_groups(&ds.time, &ds.status);
    // iterate ascending: accumulate hazard; risk-set sums built descending
    let mut denom = 0.0;
    let mut steps: Vec<(f64, f64)> = Vec::new(); // (time, d_k/denom_k) descending
    for (t, members, events) in &groups.groups {
        for &i in members {
            denom += lp[i].exp();
        }
        if !events.is_empty() {
            steps.push((*t, events.len() as f64 / denom));
        }
    }
    steps.reverse();
    let mut knots = Vec::with_capacity(steps.len());
    let mut values = Vec::with_capacity(steps.len());
    let mut h = 0.0;
    for (t, jump) in steps {
        h += jump;
        knots.push(t);
        values.push(h);
    }
    Ok(StepFunction { knots, values, left: 0.0 })
}

impl CoxModel {
    /// Linear predictor βᵀ(x − x̄) for one covariate vector.
    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.beta.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} covariates, got {}",
                self.beta.len(),
                x.len()
            )));
        }
        Ok(x.iter()
            .zip(self.beta.iter())
            .zip(self.x_mean.iter())
            .map(|((&xi, &b), &m)| b * (xi - m))
            .sum())
    }

    /// Linear predictors for every row of a covariate matrix.
    pub fn linear_predictors(&self, xs: &Array2<f64>) -> Result<Vec<f64>> {
        (0..xs.nrows())
            .map(|r| self.linear_predictor(xs.row(r).to_slice().unwrap()))
            .collect()
    }

    /// Predicted survival S(t|x) = exp(−H0(t)·exp(βᵀ(x − x̄))).
    pub fn predict_survival(&self, x: &[f64], t: f64) -> Result<f64> {
        assert!(t >= 0.0, "prediction time must be nonnegative");
        let lp = self.linear_predictor(x)?;
        Ok((-self.baseline.eval(t) * lp.exp()).exp())
    }

    /// Per-subject survival-curve evaluator for a test matrix: returns a
    /// closure t → vector of S(t|xᵢ).
    pub fn survival_curves(&self, xs: &Array2<f64>) -> Result<impl Fn(f64) -> Vec<f64> + '_> {
        let exp_lp: Vec<f64> =
            self.linear_predictors(xs)?.into_iter().map(f64::exp).collect();
        let baseline = self.baseline.clone();
        Ok(move |t: f64| {
            let h0 = baseline.eval(t);
            exp_lp.iter().map(|&e| (-h0 * e).exp()).collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Aic,
    Bic,
}

/// Result of stepwise selection: the refitted final model plus the selected
/// column indices (into the dataset passed in, forced columns first).
#[derive(Debug, Clone)]
pub struct StepwiseFit {
    pub model: CoxModel,
    pub selected: Vec<usize>,
    pub criterion_value: f64,
}

fn criterion_value(c: Criterion, loglik: f64, k: usize, n_events: usize) -> f64 {
    match c {
        Criterion::Aic => -2.0 * loglik + 2.0 * k as f64,
        // effective sample size for censored data is the event count
        Criterion::Bic => -2.0 * loglik + (n_events.max(1) as f64).ln() * k as f64,
    }
}

/// Bidirectional stepwise selection from the forced-columns model.
///
/// At each step the single add/remove move with the largest criterion
/// improvement is taken; the search stops when no move improves. Forced
/// columns (the treatment term) are never removed. Moves whose fit fails
/// are skipped; the initial forced-model fit must succeed. Deterministic for
/// a fixed column order: ties are broken by enumeration order (adds in
/// candidate order, then removes).
pub fn stepwise(
    ds: &SurvivalDataset,
    candidates: &[usize],
    criterion: Criterion,
    forced: &[usize],
    options: &CoxOptions,
) -> Result<StepwiseFit> {
    let n_events = ds.n_events();
    let mut current: Vec<usize> = forced.to_vec();
    for &c in candidates {
        if c >= ds.d() {
            return Err(Error::InvalidArgument(format!("candidate column {c} out of range")));
        }
    }

    let fit_value = |cols: &[usize]| -> Option<f64> {
        if cols.is_empty() {
            let groups = risk_groups(&ds.time, &ds.status);
            let xs = Array2::<f64>::zeros((ds.n(), 0));
            let (ll, _, _) = partial_lik(&xs, &groups, &Array1::zeros(0), options.ties);
            return Some(criterion_value(criterion, ll, 0, n_events));
        }
        let sub = ds.select_columns(cols);
        fit(&sub, options).ok().map(|m| criterion_value(criterion, m.loglik, cols.len(), n_events))
    };

    let mut best = match fit_value(&current) {
        Some(v) => v,
        None => {
            // surface the underlying error for the mandatory starting model
            let sub = ds.select_columns(&current);
            return Err(fit(&sub, options).unwrap_err());
        }
    };

    loop {
        let mut best_move: Option<(f64, Vec<usize>)> = None;
        for &c in candidates {
            if current.contains(&c) {
                continue;
            }
            let mut cols = current.clone();
            cols.push(c);
            if let Some(v) = fit_value(&cols) {
                if best_move.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    best_move = Some((v, cols));
                }
            }
        }
        for &c in current.iter() {
            if forced.contains(&c) {
                continue;
            }
            let cols: Vec<usize> = current.iter().copied().filter(|&x| x != c).collect();
            if let Some(v) = fit_value(&cols) {
                if best_move.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    best_move = Some((v, cols));
                }
            }
        }
        match best_move {
            Some((v, cols)) if v < best - 1e-10 => {
                best = v;
                current = cols;
            }
            _ => break,
        }
    }

    if current.is_empty() {
        return Err(Error::Degenerate("stepwise selection retained no covariates".into()));
    }
    let sub = ds.select_columns(&current);
    let model = fit(&sub, options)?;
    Ok(StepwiseFit { model, selected: current, criterion_value: best })
}

/// Grambsch–Therneau proportional-hazards test result.
#[derive(Debug, Clone)]
pub struct PhTestResult {
    /// Per covariate: (name, chi-square, df, p-value).
    pub per_covariate: Vec<(String, f64, usize, f64)>,
    pub global_chi2: f64,
    pub global_df: usize,
    pub global_p: f64,
}

/// Grambsch–Therneau test: Schoenfeld residuals regressed on
/// Kaplan–Meier-transformed time, g(t) = 1 − KM(t).
pub fn ph_test(model: &CoxModel, ds: &SurvivalDataset) -> Result<PhTestResult> {
    if !model.converged {
        return Err(Error::InvalidArgument("ph_test requires a converged model".into()));
    }
    let p = ds.d();
    if model.beta.len() != p {
        return Err(Error::InvalidArgument("model/dataset dimension mismatch".into()));
    }
    let d_total = ds.n_events();
    if d_total < 2 {
        return Err(Error::Degenerate("need at least 2 events".into()));
    }
    if d_total <= p {
        return Err(Error::Degenerate("fewer events than covariates".into()));
    }

    // Schoenfeld residuals on the raw scale, centered covariate means
    // weighted by exp(lp) with the fitted tie correction
    let n = ds.n();
    let mut mean = vec![0.0; p];
    for c in 0..p {
        mean[c] = ds.x.column(c).sum() / n as f64;
    }
    let xc = {
        let mut m = ds.x.clone();
        for c in 0..p {
            for r in 0..n {
                m[[r, c]] -= mean[c];
            }
        }
        m
    };
    let lp: Vec<f64> = (0..n).map(|r| xc.row(r).dot(&model.beta)).collect();
    let groups = risk_groups(&ds.time, &ds.status);

    let mut s0 = 0.0;
    let mut s1 = Array1::<f64>::zeros(p);
    // (event time, residual) pairs, collected descending then reversed
    let mut residuals: Vec<(f64, Array1<f64>)> = Vec::new();
    for (t, members, events) in &groups.groups {
        for &i in members {
            let w = lp[i].exp();
            s0 += w;
            for a in 0..p {
                s1[a] += w * xc[[i, a]];
            }
        }
        let d = events.len();
        if d == 0 {
            continue;
        }
        let mut sd0 = 0.0;
        let mut sd1 = Array1::<f64>::zeros(p);
        for &i in events {
            let w = lp[i].exp();
            sd0 += w;
            for a in 0..p {
                sd1[a] += w * xc[[i, a]];
            }
        }
        // average of the Efron l-step weighted means over the tie group; the
        // group's residual sum then matches its score contribution
        let mut mbar = Array1::<f64>::zeros(p);
        for l in 0..d {
            let f = match model.ties {
                Ties::Efron => l as f64 / d as f64,
                Ties::Breslow => 0.0,
            };
            let denom = s0 - f * sd0;
            for a in 0..p {
                mbar[a] += (s1[a] - f * sd1[a]) / denom / d as f64;
            }
        }
        for &i in events {
            let mut r = Array1::<f64>::zeros(p);
            for a in 0..p {
                r[a] = xc[[i, a]] - mbar[a];
            }
            residuals.push((*t, r));
        }
    }
    residuals.reverse();

    // KM transform of event times
    let km = km_estimator(&ds.time, &ds.status);
    let g: Vec<f64> = residuals.iter().map(|(t, _)| 1.0 - km.eval(*t)).collect();
    let g_mean = g.iter().sum::<f64>() / g.len() as f64;
    let gt: Vec<f64> = g.iter().map(|v| v - g_mean).collect();
    let gt_ss: f64 = gt.iter().map(|v| v * v).sum();
    if gt_ss <= 0.0 {
        return Err(Error::Degenerate("degenerate time transform (all events tied)".into()));
    }

    let mut u = Array1::<f64>::zeros(p);
    for (k, (_, r)) in residuals.iter().enumerate() {
        for a in 0..p {
            u[a] += gt[k] * r[a];
        }
    }

    let d = d_total as f64;
    let global_chi2 = d * u.dot(&model.cov.dot(&u)) / gt_ss;
    let chi_global = ChiSquared::new(p as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let global_p = 1.0 - chi_global.cdf(global_chi2);
    let chi1 = ChiSquared::new(1.0).unwrap();
    let per_covariate = (0..p)
        .map(|j| {
            let chi2 = d * u[j] * u[j] * model.cov[[j, j]] / gt_ss;
            (model.names[j].clone(), chi2, 1usize, 1.0 - chi1.cdf(chi2))
        })
        .collect();
    Ok(PhTestResult { per_covariate, global_chi2, global_df: p, global_p })
}
