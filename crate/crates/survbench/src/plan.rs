//! Experiment plans: which scenarios, methods, and metrics to run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use survcore::rng::stream_key;
use survcore::rsf::SplitRule;
use survcore::simgen::{HazardSpec, Reference, ScenarioConfig};
use survcore::{Error, Result};

/// A benchmarked method: the Cox model or a forest with one splitting rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Cox,
    Rsf(SplitRule),
}

impl Method {
    /// All seven methods in presentation order.
    pub fn all() -> Vec<Method> {
        let mut out = vec![Method::Cox];
        out.extend(SplitRule::ALL.iter().map(|&r| Method::Rsf(r)));
        out
    }

    pub fn id(&self) -> String {
        match self {
            Method::Cox => "cox".to_string(),
            Method::Rsf(rule) => format!("rsf:{}", rule.id()),
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        if s == "cox" {
            return Ok(Method::Cox);
        }
        if let Some(rule) = s.strip_prefix("rsf:").and_then(SplitRule::from_id) {
            return Ok(Method::Rsf(rule));
        }
        Err(Error::InvalidArgument(format!(
            "unknown method {s:?}; expected \"cox\" or \"rsf:<rule>\" with rule one of {:?}",
            SplitRule::ALL.iter().map(|r| r.id()).collect::<Vec<_>>()
        )))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Method> {
        Method::parse(&s)
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.id()
    }
}

/// Metrics computed on each simulated test set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMetric {
    CIndex,
    Ibs,
    Calibration,
}

impl PlanMetric {
    pub fn id(self) -> &'static str {
        match self {
            PlanMetric::CIndex => "c_index",
            PlanMetric::Ibs => "ibs",
            PlanMetric::Calibration => "calibration",
        }
    }
}

fn default_metrics() -> Vec<PlanMetric> {
    vec![PlanMetric::CIndex, PlanMetric::Ibs, PlanMetric::Calibration]
}

fn default_workers() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

/// A complete simulation study: scenario grid × methods × metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub scenarios: Vec<ScenarioConfig>,
    pub methods: Vec<Method>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<PlanMetric>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Tune forest hyperparameters per replicate by OOB grid search; when
    /// off, every forest uses its rule's default parameters.
    #[serde(default = "default_true")]
    pub tune_rsf: bool,
    /// Directory with the reference CSVs and schemas used to calibrate the
    /// generators.
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Global seed; per-scenario seeds are derived from it, so this one
    /// value determines the entire run.
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let plan: ExperimentPlan = serde_json::from_str(&text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::InvalidArgument("plan has no scenarios".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("plan has no methods".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidArgument("plan has no metrics".into()));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }

    /// Scenarios with their seeds derived from the plan's global seed, in
    /// plan order. Scenario position — not its JSON `seed` field — fixes
    /// the stream, so one plan seed reproduces the whole study.
    pub fn effective_scenarios(&self) -> Vec<ScenarioConfig> {
        self.scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut s = s.clone();
                s.seed = stream_key(self.seed, i as u64, "scenario");
                s
            })
            .collect()
    }

    /// Cap every scenario at 20 replicates for desk-scale smoke runs.
    pub fn apply_smoke(&mut self) {
        for s in &mut self.scenarios {
            s.n_sim = s.n_sim.min(20);
        }
    }

    /// The full factorial study grid: both references × N ∈ {100, 200, 400}
    /// × censoring ∈ {0.30, 0.60} × β_treatment ∈ {0, 0.8, −0.4} × shape
    /// γ ∈ {0.8, 1, 2} plus the nonproportional (2, 5) pair; n_sim = 500,
    /// test size 500, all seven methods and all three metrics.
    pub fn paper_grid(seed: u64) -> ExperimentPlan {
        let mut scenarios = Vec::new();
        for &reference in &[Reference::Pbc, Reference::Prostate] {
            let lambda = reference.default_lambda();
            for &n_train in &[100usize, 200, 400] {
                for &censoring in &[0.30, 0.60] {
                    for &beta_treatment in &[0.0, 0.8, -0.4] {
                        let mut hazards: Vec<HazardSpec> = [0.8, 1.0, 2.0]
                            .iter()
                            .map(|&g| HazardSpec::proportional(lambda, g))
                            .collect();
                        hazards.push(HazardSpec::nonproportional(lambda, 2.0, 5.0));
                        for hazard in hazards {
                            scenarios.push(ScenarioConfig::with_defaults(
                                reference,
                                n_train,
                                censoring,
                                beta_treatment,
                                hazard,
                                0,
                            ));
                        }
                    }
                }
            }
        }
        ExperimentPlan {
            scenarios,
            methods: Method::all(),
            metrics: default_metrics(),
            workers: 1,
            tune_rsf: true,
            data_dir: default_data_dir(),
            seed,
        }
    }
}
