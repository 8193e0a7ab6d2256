//! Executes plans: one independent single-threaded run per (cell, seed), spread
//! over a rayon pool, results collected in plan order.

use std::collections::BTreeMap;
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use trsqp_core::baseline::{run_baseline, BaselineConfig};
use trsqp_core::{make_hs_problem, make_logreg_problem, parse_libsvm, Problem, RunRecord, SolverConfig};

use crate::error::{CliError, Result};
use crate::plan::{Cell, ExperimentPlan, SolverSpec};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "TRSQP_THREADS";

/// Outcome of one seed of one cell.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    /// `Err` holds the message of a run that could not start.
    pub record: std::result::Result<RunRecord, String>,
}

impl SeedOutcome {
    pub fn failed(&self) -> bool {
        match &self.record {
            Ok(r) => r.status.is_failure(),
            Err(_) => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub outcomes: Vec<SeedOutcome>,
}

impl CellResult {
    /// Every seed failed.
    pub fn fully_failed(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.iter().all(SeedOutcome::failed)
    }

    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.outcomes.iter().filter_map(|o| o.record.as_ref().ok())
    }
}

/// Resolves `libsvm:<path>` or a built-in problem name.
pub fn load_problem(name: &str, plan: &ExperimentPlan) -> Result<Arc<dyn Problem>> {
    if let Some(path) = name.strip_prefix("libsvm:") {
        let data = parse_libsvm(path, None)?;
        let stem = std::path::Path::new(path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("libsvm");
        let p = make_logreg_problem(stem, data, plan.logreg_m, plan.base_seed)?;
        return Ok(Arc::new(p));
    }
    Ok(Arc::from(make_hs_problem(name)?))
}

fn budget(problem: &dyn Problem, plan: &ExperimentPlan) -> usize {
    match (plan.epochs, problem.finite_sum()) {
        (Some(e), Some(fs)) => e * fs.n_components(),
        _ => plan.max_iter,
    }
}

/// Runs one seed of one cell.
pub fn run_one(problem: &dyn Problem, cell: &Cell, seed: u64, plan: &ExperimentPlan) -> trsqp_core::Result<RunRecord> {
    let noise = cell.noise.model();
    let max_iter = budget(problem, plan);
    match cell.solver {
        SolverSpec::Tr(hessian) => {
            let cfg = SolverConfig {
                hessian,
                beta: cell.beta.0,
                max_iter,
                kkt_tol: plan.kkt_tol,
                seed,
                ..Default::default()
            };
            trsqp_core::run(problem, &noise, &cfg)
        }
        SolverSpec::L1 => {
            let cfg = BaselineConfig {
                beta: cell.beta.0,
                max_iter,
                kkt_tol: plan.kkt_tol,
                seed,
                ..Default::default()
            };
            run_baseline(problem, &noise, &cfg)
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs every (cell, seed) pair. Problems that fail to load turn every seed of
/// their cells into a start-up failure.
pub fn execute(plan: &ExperimentPlan) -> Result<Vec<CellResult>> {
    plan.validate()?;
    let mut problems: BTreeMap<String, std::result::Result<Arc<dyn Problem>, String>> = BTreeMap::new();
    for name in plan.problem_names() {
        let loaded = load_problem(&name, plan).map_err(|e| e.to_string());
        problems.insert(name, loaded);
    }
    let cells = plan.cells();
    let seeds = plan.seed_list();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();

    let pool = thread_pool()?;
    let outcomes: Vec<(usize, SeedOutcome)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ci, seed)| {
                let cell = &cells[ci];
                let record = match &problems[cell.problem.as_str()] {
                    Ok(p) => run_one(p.as_ref(), cell, seed, plan).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                };
                (ci, SeedOutcome { seed, record })
            })
            .collect()
    });

    let mut results: Vec<CellResult> = cells
        .into_iter()
        .map(|cell| CellResult {
            cell,
            outcomes: Vec::new(),
        })
        .collect();
    // par_iter().collect() preserves job order, so outcomes arrive sorted by seed
    for (ci, o) in outcomes {
        results[ci].outcomes.push(o);
    }
    for r in &results {
        let failed = r.outcomes.iter().filter(|o| o.failed()).count();
        if failed > 0 {
            warn!("{}: {failed}/{} runs failed", r.cell.key(), r.outcomes.len());
        } else {
            info!("{}: {} runs", r.cell.key(), r.outcomes.len());
        }
    }
    Ok(results)
}
