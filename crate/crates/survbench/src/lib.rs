//! Benchmarking front-end for the survival models in `survcore`: experiment
//! plans, a resumable simulation runner, .632+ bootstrap evaluation on real
//! datasets, and plot-ready CSV summaries.

pub mod engine;
pub mod plan;
pub mod plots;
pub mod realdata;

pub use engine::{read_results, run_scenarios, scenario_key, ResultRow};
pub use plan::{ExperimentPlan, Method, PlanMetric};
pub use plots::emit_plot_data;
pub use realdata::{run_real_data_bootstrap, write_bootstrap_csv, RealDataRow};
