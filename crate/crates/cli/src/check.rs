//! Invariant suite: short runs of every Hessian kind on every built-in
//! problem, with per-iteration invariants and the run-level control-parameter
//! bounds checked.

use rayon::prelude::*;
use serde::Serialize;
use trsqp_core::trace::InvariantViolation;
use trsqp_core::trsqp::parameter_bounds;
use trsqp_core::{builtin_names, make_hs_problem, BetaSchedule, HessianKind, NoiseModel, SolverConfig};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub problems: Vec<String>,
    pub kinds: Vec<HessianKind>,
    pub noise: Vec<f64>,
    pub betas: Vec<BetaSchedule>,
    pub seeds: u64,
    pub max_iter: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            problems: builtin_names().into_iter().map(String::from).collect(),
            kinds: HessianKind::ALL.to_vec(),
            noise: vec![0.0, 1e-4, 1e-1],
            betas: vec![BetaSchedule::Constant(0.5), BetaSchedule::Power(0.8)],
            seeds: 1,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunCheck {
    pub label: String,
    pub iterations: usize,
    pub status: String,
    pub detail: Option<String>,
    pub violations: Vec<InvariantViolation>,
    pub bounds_hold: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub runs: Vec<RunCheck>,
}

impl CheckReport {
    pub fn iterations(&self) -> usize {
        self.runs.iter().map(|r| r.iterations).sum()
    }

    pub fn violations(&self) -> usize {
        self.runs.iter().map(|r| r.violations.len()).sum()
    }

    /// Violation counts per invariant name, sorted by name.
    pub fn violations_by_name(&self) -> Vec<(String, usize)> {
        let mut m = std::collections::BTreeMap::new();
        for r in &self.runs {
            for v in &r.violations {
                *m.entry(v.name.to_string()).or_insert(0) += 1;
            }
        }
        m.into_iter().collect()
    }

    /// Runs that ended with a failure status; not an invariant breach by itself.
    pub fn failed_runs(&self) -> impl Iterator<Item = &RunCheck> {
        self.runs.iter().filter(|r| r.status == "failed")
    }

    pub fn passed(&self) -> bool {
        self.runs.iter().all(|r| r.violations.is_empty() && r.bounds_hold)
    }
}

pub fn run_check(cfg: &CheckConfig) -> Result<CheckReport> {
    let mut jobs = Vec::new();
    for p in &cfg.problems {
        for &k in &cfg.kinds {
            for &s2 in &cfg.noise {
                for &b in &cfg.betas {
                    for seed in 0..cfg.seeds {
                        jobs.push((p.clone(), k, s2, b, seed));
                    }
                }
            }
        }
    }
    let runs = jobs
        .par_iter()
        .map(|(p, k, s2, b, seed)| -> Result<RunCheck> {
            let problem = make_hs_problem(p)?;
            let config = SolverConfig {
                hessian: *k,
                beta: *b,
                max_iter: cfg.max_iter,
                seed: *seed,
                check_invariants: true,
                ..Default::default()
            };
            let noise = if *s2 == 0.0 { NoiseModel::exact() } else { NoiseModel::gaussian(*s2) };
            let rec = trsqp_core::run(problem.as_ref(), &noise, &config)?;
            let bounds_hold = parameter_bounds(&rec.rows, config.zeta, b.beta_max()).is_none_or(|pb| pb.holds);
            Ok(RunCheck {
                label: format!("{p}/{k}/σ²={s2:e}/{b}/seed{seed}"),
                iterations: rec.iterations(),
                status: rec.status.label().to_string(),
                detail: match rec.status {
                    trsqp_core::RunStatus::Failed(m) => Some(m),
                    _ => None,
                },
                violations: rec.violations,
                bounds_hold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport { runs })
}
