use std::path::PathBuf;

use clap::{Parser, Subcommand};
use survbench::{
    emit_plot_data, run_real_data_bootstrap, run_scenarios, write_bootstrap_csv, ExperimentPlan,
    Method,
};
use survcore::{Error, Result};

#[derive(Parser)]
#[command(
    name = "survbench",
    version,
    about = "Benchmark survival models: simulation studies and .632+ bootstrap evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) a simulation experiment plan
    Simulate {
        /// Plan JSON; omit to run the built-in full study grid
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Output directory for results.csv and its sidecar files
        #[arg(long)]
        out: PathBuf,
        /// Override the plan's worker count
        #[arg(long)]
        workers: Option<usize>,
        /// Cap each scenario at 20 replicates for a quick end-to-end pass
        #[arg(long)]
        smoke: bool,
    },
    /// Bootstrap-evaluate methods on a real dataset
    Bootstrap {
        /// Dataset CSV
        #[arg(long)]
        data: PathBuf,
        /// Dataset schema JSON
        #[arg(long)]
        schema: PathBuf,
        /// Number of bootstrap resamples
        #[arg(long = "B", default_value_t = 1000)]
        b: usize,
        /// Output directory for bootstrap_results.csv
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated method ids (default: all seven)
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip forest hyperparameter tuning
        #[arg(long)]
        no_tune: bool,
        /// Cap the resample count at 50
        #[arg(long)]
        smoke: bool,
    },
    /// Summarize a results directory into plot-ready CSVs
    Plots {
        /// Directory containing results.csv (and calibration sidecars)
        #[arg(long)]
        results: PathBuf,
        /// Output directory for the plot CSVs
        #[arg(long)]
        out: PathBuf,
    },
}

/// `SURVBENCH_SEED`, when set, overrides the seed from the plan or flags.
fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var("SURVBENCH_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::InvalidArgument(format!("SURVBENCH_SEED={s:?} is not a u64"))),
        Err(_) => Ok(None),
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { plan, out, workers, smoke } => {
            let mut plan = match plan {
                Some(path) => ExperimentPlan::from_file(path)?,
                None => ExperimentPlan::paper_grid(0),
            };
            if let Some(seed) = seed_from_env()? {
                plan.seed = seed;
            }
            if let Some(w) = workers {
                plan.workers = w;
            }
            if smoke {
                plan.apply_smoke();
            }
            let tasks = plan.scenarios.iter().map(|s| s.n_sim).sum::<usize>() * plan.methods.len();
            println!(
                "plan: {} scenarios × {} methods, {} tasks, seed {}",
                plan.scenarios.len(),
                plan.methods.len(),
                tasks,
                plan.seed
            );
            let (path, computed) = run_scenarios(&plan, &out)?;
            println!("computed {computed} tasks ({} reused); results at {}", tasks - computed, path.display());
        }
        Command::Bootstrap { data, schema, b, out, methods, seed, no_tune, smoke } => {
            let methods = if methods.is_empty() {
                Method::all()
            } else {
                methods.iter().map(|s| Method::parse(s)).collect::<Result<Vec<_>>>()?
            };
            let seed = seed_from_env()?.unwrap_or(seed);
            let b = if smoke { b.min(50) } else { b };
            let rows = run_real_data_bootstrap(&data, &schema, b, &methods, seed, !no_tune)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("bootstrap_results.csv");
            write_bootstrap_csv(&path, &rows)?;
            for row in &rows {
                let r = &row.result;
                println!(
                    "{} {:<22} {:<7} {:.4}  ci [{:.4}, {:.4}]{}",
                    row.dataset,
                    row.method,
                    r.metric.id(),
                    r.theta_632plus,
                    r.ci_low,
                    r.ci_high,
                    if r.ci_inverted { "  (inverted)" } else { "" }
                );
            }
            println!("wrote {}", path.display());
        }
        Command::Plots { results, out } => {
            for path in emit_plot_data(&results, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
