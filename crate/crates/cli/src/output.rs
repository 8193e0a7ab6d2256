//! CSV and JSON emission for plan results.
//!
//! Layout under the output directory:
//! `traces/<cell>__seed<s>.csv`, `summaries/<cell>.csv`,
//! `proportions/<cell>.csv` (trust-region cells only) and `summary.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use trsqp_core::{IterRow, RunRecord, TRACE_COLUMNS, TRACE_SCHEMA_VERSION};

use crate::error::Result;
use crate::plan::{Cell, ExperimentPlan, SolverSpec};
use crate::runner::CellResult;

pub const PROPORTION_COLUMNS: [&str; 12] = [
    "problem", "solver", "noise", "beta", "seed", "iterations", "case1", "case2", "case3", "case1_pct", "case2_pct",
    "case3_pct",
];

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

fn row_fields(row: &IterRow) -> Vec<String> {
    vec![
        row.k.to_string(),
        fmt_f64(row.true_kkt),
        fmt_f64(row.est_kkt),
        fmt_f64(row.feas),
        fmt_f64(row.opt),
        fmt_f64(row.delta),
        fmt_f64(row.delta_feas),
        fmt_f64(row.delta_opt),
        fmt_f64(row.gamma),
        row.case.to_string(),
        fmt_f64(row.mu),
        fmt_f64(row.norm_b),
        fmt_f64(row.eta1),
        fmt_f64(row.eta2),
        fmt_f64(row.alpha),
        fmt_f64(row.tau),
        fmt_f64(row.beta),
        fmt_f64(row.norm_g),
        fmt_f64(row.sigma_min_g),
        row.merit_increases.to_string(),
    ]
}

/// Writes one run's per-iteration trace.
pub fn write_trace<W: Write>(out: W, rec: &RunRecord, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TRACE_COLUMNS.to_vec();
    if timing {
        header.push("wall_ns");
    }
    w.write_record(&header)?;
    for row in &rec.rows {
        let mut f = row_fields(row);
        if timing {
            f.push(row.wall_ns.to_string());
        }
        w.write_record(&f)?;
    }
    w.flush()?;
    Ok(())
}

/// Linear-interpolation quantiles of final KKT residuals. Failed runs count
/// as `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v: Vec<f64> = values
            .iter()
            .map(|&x| if x.is_nan() { f64::INFINITY } else { x })
            .collect();
        v.sort_by(f64::total_cmp);
        Self {
            min: quantile(&v, 0.0),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            max: quantile(&v, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub status: String,
    pub detail: Option<String>,
    pub iterations: usize,
    pub final_kkt: f64,
    pub final_feasibility: f64,
    pub final_optimality: f64,
    pub final_objective: f64,
    pub merit_increases: usize,
    pub last_merit_increase: Option<usize>,
    pub sr1_skips: usize,
    pub invariant_violations: usize,
    pub lipschitz_grad: f64,
    pub lipschitz_jac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub key: String,
    pub problem: String,
    pub solver: String,
    pub noise: String,
    pub beta: String,
    pub failed_runs: usize,
    pub final_kkt: Quantiles,
    /// Iterations in cases 1, 2 and 3 pooled over seeds; trust-region only.
    pub case_counts: Option<[usize; 3]>,
    pub runs: Vec<RunSummary>,
}

/// Contents of `summary.json`. Non-finite numbers are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub trace_schema_version: u32,
    pub plan: ExperimentPlan,
    pub cells: Vec<CellSummary>,
}

fn run_summary(seed: u64, rec: &std::result::Result<RunRecord, String>) -> RunSummary {
    match rec {
        Ok(r) => RunSummary {
            seed,
            status: r.status.label().to_string(),
            detail: match &r.status {
                trsqp_core::RunStatus::Failed(m) => Some(m.clone()),
                _ => None,
            },
            iterations: r.iterations(),
            final_kkt: r.final_kkt.total,
            final_feasibility: r.final_kkt.feasibility,
            final_optimality: r.final_kkt.optimality,
            final_objective: r.final_objective,
            merit_increases: r.merit_increases,
            last_merit_increase: r.last_merit_increase,
            sr1_skips: r.sr1_skips,
            invariant_violations: r.violations.len(),
            lipschitz_grad: r.lipschitz_grad,
            lipschitz_jac: r.lipschitz_jac,
        },
        Err(msg) => RunSummary {
            seed,
            status: "failed".into(),
            detail: Some(msg.clone()),
            iterations: 0,
            final_kkt: f64::NAN,
            final_feasibility: f64::NAN,
            final_optimality: f64::NAN,
            final_objective: f64::NAN,
            merit_increases: 0,
            last_merit_increase: None,
            sr1_skips: 0,
            invariant_violations: 0,
            lipschitz_grad: f64::NAN,
            lipschitz_jac: f64::NAN,
        },
    }
}

pub fn case_counts(rec: &RunRecord) -> [usize; 3] {
    let mut c = [0usize; 3];
    for row in &rec.rows {
        if (1..=3).contains(&row.case) {
            c[row.case as usize - 1] += 1;
        }
    }
    c
}

pub fn summarize(result: &CellResult) -> CellSummary {
    let runs: Vec<RunSummary> = result.outcomes.iter().map(|o| run_summary(o.seed, &o.record)).collect();
    let finals: Vec<f64> = runs.iter().map(|r| r.final_kkt).collect();
    let case_counts = matches!(result.cell.solver, SolverSpec::Tr(_)).then(|| {
        result.records().map(case_counts).fold([0; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
    });
    CellSummary {
        key: result.cell.key(),
        problem: result.cell.problem.clone(),
        solver: result.cell.solver.to_string(),
        noise: result.cell.noise.label(),
        beta: result.cell.beta.0.to_string(),
        failed_runs: result.outcomes.iter().filter(|o| o.failed()).count(),
        final_kkt: Quantiles::of(&finals),
        case_counts,
        runs,
    }
}

pub fn write_cell_summary<W: Write>(out: W, s: &CellSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["statistic", "final_kkt"])?;
    let q = &s.final_kkt;
    for (name, v) in [("min", q.min), ("q25", q.q25), ("median", q.median), ("q75", q.q75), ("max", q.max)] {
        w.write_record([name, &fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

fn percent(counts: [usize; 3]) -> [f64; 3] {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return [f64::NAN; 3];
    }
    counts.map(|c| 100.0 * c as f64 / n as f64)
}

/// Per-seed and pooled (`seed = all`) case proportions of a trust-region cell.
pub fn write_proportions<W: Write>(out: W, cell: &Cell, result: &CellResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROPORTION_COLUMNS)?;
    let mut pooled = [0usize; 3];
    let mut line = |seed: String, c: [usize; 3]| -> Result<()> {
        let p = percent(c);
        let n: usize = c.iter().sum();
        let mut rec = vec![
            cell.problem.clone(),
            cell.solver.to_string(),
            cell.noise.label(),
            cell.beta.0.to_string(),
            seed,
            n.to_string(),
        ];
        rec.extend(c.iter().map(|v| v.to_string()));
        rec.extend(p.iter().map(|v| format!("{v:.3}")));
        w.write_record(&rec)?;
        Ok(())
    };
    for o in &result.outcomes {
        if let Ok(r) = &o.record {
            let c = case_counts(r);
            for i in 0..3 {
                pooled[i] += c[i];
            }
            line(o.seed.to_string(), c)?;
        }
    }
    line("all".into(), pooled)?;
    w.flush()?;
    Ok(())
}

pub fn trace_path(dir: &Path, cell: &Cell, seed: u64) -> PathBuf {
    dir.join("traces").join(format!("{}__seed{seed}.csv", cell.key()))
}

/// Writes every artifact of a finished plan and returns the summaries.
pub fn write_results(dir: &Path, plan: &ExperimentPlan, results: &[CellResult]) -> Result<PlanSummary> {
    for sub in ["traces", "summaries", "proportions"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let mut cells = Vec::with_capacity(results.len());
    for r in results {
        for o in &r.outcomes {
            if let Ok(rec) = &o.record {
                let f = fs::File::create(trace_path(dir, &r.cell, o.seed))?;
                write_trace(std::io::BufWriter::new(f), rec, plan.timing)?;
            }
        }
        let s = summarize(r);
        let f = fs::File::create(dir.join("summaries").join(format!("{}.csv", s.key)))?;
        write_cell_summary(f, &s)?;
        if matches!(r.cell.solver, SolverSpec::Tr(_)) {
            let f = fs::File::create(dir.join("proportions").join(format!("{}.csv", s.key)))?;
            write_proportions(f, &r.cell, r)?;
        }
        cells.push(s);
    }
    let summary = PlanSummary {
        trace_schema_version: TRACE_SCHEMA_VERSION,
        // the output directory is not part of the result
        plan: ExperimentPlan {
            out: None,
            ..plan.clone()
        },
        cells,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(dir.join("summary.json"), text)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((q.min, q.q25, q.median, q.q75, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = Quantiles::of(&[1.0, 2.0]);
        assert_eq!(q.median, 1.5);
        let q = Quantiles::of(&[1.0, f64::NAN, 2.0]);
        assert_eq!((q.median, q.max), (2.0, f64::INFINITY));
        assert!(Quantiles::of(&[]).median.is_nan());
    }

    #[test]
    fn percentages() {
        assert_eq!(percent([7, 0, 3]), [70.0, 0.0, 30.0]);
        assert!(percent([0, 0, 0])[0].is_nan());
    }
}
