//! Scenario files, run orchestration, studies and CSV artifacts.

use std::path::{Path, PathBuf};

pub mod config;
pub mod output;
pub mod run;
pub mod studies;

pub use config::{load_config, InitFamily, LoadedScenario, Scenario, SolverForm};
pub use run::{run_scenario, simulate, summarize, write_outputs, GronwallVerdict, RunSummary, ScenarioRun};
pub use studies::{
    refinement_study, regularization_study, sweep, write_orders, write_regularization, write_sweep, Order, Refinement,
    Regularization, SweepRow,
};

/// Environment variable that overrides the output root.
pub const OUT_DIR_ENV: &str = "NS1D_OUT_DIR";

/// Output directory for a scenario: the explicit path if given, else
/// `$NS1D_OUT_DIR/<name>`, else `out/<name>`.
pub fn output_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    root.join(name)
}
