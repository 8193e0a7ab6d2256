//! Per-run records shared by the trust-region solver and the baseline.

use serde::Serialize;

use crate::problem::KktResidual;

/// Bumped whenever the columns of [`IterRow`] change.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// One iteration. Residual columns refer to the iterate at the start of the
/// iteration; `mu` is the merit parameter after the iteration's update.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRow {
    pub k: usize,
    pub true_kkt: f64,
    pub est_kkt: f64,
    pub feas: f64,
    pub opt: f64,
    pub delta: f64,
    pub delta_feas: f64,
    pub delta_opt: f64,
    pub gamma: f64,
    /// Radius-rule branch (1, 2 or 3); 0 for the line-search baseline.
    pub case: u8,
    pub mu: f64,
    pub norm_b: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub alpha: f64,
    pub tau: f64,
    pub beta: f64,
    pub norm_g: f64,
    pub sigma_min_g: f64,
    /// Merit-parameter increases in this iteration.
    pub merit_increases: usize,
    #[serde(skip)]
    pub wall_ns: u64,
}

/// Column names of the CSV trace, in [`IterRow`] field order.
pub const TRACE_COLUMNS: [&str; 20] = [
    "k",
    "true_kkt",
    "est_kkt",
    "feas",
    "opt",
    "delta",
    "delta_feas",
    "delta_opt",
    "gamma",
    "case",
    "mu",
    "norm_b",
    "eta1",
    "eta2",
    "alpha",
    "tau",
    "beta",
    "norm_g",
    "sigma_min_g",
    "merit_increases",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    /// The estimated KKT residual was exactly zero; the run stops there.
    ZeroEstimatedResidual,
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::ZeroEstimatedResidual => "zero_estimated_residual",
            RunStatus::Failed(_) => "failed",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, RunStatus::Failed(_))
    }
}

/// A per-iteration property that did not hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantViolation {
    pub k: usize,
    pub name: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub problem: String,
    pub solver: String,
    pub seed: u64,
    pub rows: Vec<IterRow>,
    pub status: RunStatus,
    pub final_x: Vec<f64>,
    pub final_kkt: KktResidual,
    pub final_objective: f64,
    pub merit_increases: usize,
    pub last_merit_increase: Option<usize>,
    pub sr1_skips: usize,
    pub lipschitz_grad: f64,
    pub lipschitz_jac: f64,
    pub violations: Vec<InvariantViolation>,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    /// Percentages of iterations in radius cases 1, 2 and 3.
    pub fn case_proportions(&self) -> [f64; 3] {
        let mut counts = [0usize; 3];
        for r in &self.rows {
            if (1..=3).contains(&r.case) {
                counts[r.case as usize - 1] += 1;
            }
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            return [0.0; 3];
        }
        counts.map(|c| 100.0 * c as f64 / n as f64)
    }

    /// Running minimum of the true KKT residual, including the final iterate.
    pub fn running_min_kkt(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.rows
            .iter()
            .map(|r| r.true_kkt)
            .chain(std::iter::once(self.final_kkt.total))
            .map(|v| {
                best = best.min(v);
                best
            })
            .collect()
    }
}
