//! Survival-analysis core for benchmarking risk-prediction models on
//! right-censored time-to-event data.
//!
//! The crate provides, from first principles:
//!
//! - CSV ingestion with schema validation, mean imputation and summary
//!   statistics for reference clinical-trial datasets ([`dataio`])
//! - Kaplan–Meier / Nelson–Aalen estimators, Harrell's C, IPCW Brier score,
//!   integrated Brier score and spline-based calibration curves ([`metrics`])
//! - Cox proportional-hazards regression via Newton–Raphson on the partial
//!   likelihood, with Efron/Breslow tie handling, Breslow baseline hazard,
//!   bidirectional stepwise AIC/BIC selection and the Grambsch–Therneau
//!   proportional-hazards test ([`coxph`])
//! - Random survival forests with six splitting rules ([`rsf`])
//! - Copula-based generation of synthetic randomized-trial datasets with
//!   Weibull survival times and calibrated uniform censoring ([`simgen`])
//! - The .632+ bootstrap estimator with percentile-of-weights confidence
//!   intervals ([`bootstrap`])
//!
//! Everything is deterministic given explicit seeds; per-replicate and
//! per-tree random streams are derived with a stable hash so results do not
//! depend on thread scheduling or worker count.

pub mod bootstrap;
pub mod coxph;
pub mod dataio;
pub mod metrics;
pub mod rng;
pub mod rsf;
pub mod simgen;
pub mod util;

mod error;

pub use error::{Error, Result};
