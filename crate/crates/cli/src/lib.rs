//! Experiment orchestration for `trsqp`: plans, concurrent execution,
//! CSV/JSON output, case-proportion reports and the invariant check suite.

pub mod check;
pub mod error;
pub mod output;
pub mod plan;
pub mod report;
pub mod runner;

pub use error::{CliError, Result};
pub use plan::{Beta, Cell, ExperimentPlan, NoiseSpec, SolverSpec};
pub use runner::{execute, CellResult};

use std::path::Path;

/// Runs a plan and writes all artifacts under `dir`. Returns the results and
/// whether any cell failed on every seed.
pub fn run_plan(plan: &ExperimentPlan, dir: &Path) -> Result<(Vec<CellResult>, bool)> {
    let results = execute(plan)?;
    output::write_results(dir, plan, &results)?;
    let any_full_failure = results.iter().any(CellResult::fully_failed);
    Ok((results, any_full_failure))
}
