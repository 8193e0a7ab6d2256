//! Experiment plans: the cartesian grid of problems, solvers, noise levels and
//! β schedules, plus seeds and budgets.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use trsqp_core::{BetaSchedule, HessianKind, NoiseModel};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SolverSpec {
    Tr(HessianKind),
    L1,
}

impl SolverSpec {
    pub fn hessian(&self) -> Option<HessianKind> {
        match self {
            SolverSpec::Tr(k) => Some(*k),
            SolverSpec::L1 => None,
        }
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Tr(k) => write!(f, "tr-{k}"),
            SolverSpec::L1 => f.write_str("l1"),
        }
    }
}

impl FromStr for SolverSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "l1" {
            return Ok(SolverSpec::L1);
        }
        let kind = s
            .strip_prefix("tr-")
            .ok_or_else(|| CliError::Config(format!("unknown solver `{s}` (tr-<hessian> or l1)")))?;
        Ok(SolverSpec::Tr(kind.parse()?))
    }
}

impl TryFrom<String> for SolverSpec {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SolverSpec> for String {
    fn from(s: SolverSpec) -> String {
        s.to_string()
    }
}

/// Gradient noise: exact, correlated Gaussian with variance `σ²`, or
/// single-sample subsampling of a finite-sum objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NoiseSpec {
    None,
    Gaussian(f64),
    Subsample,
}

impl NoiseSpec {
    pub fn model(&self) -> NoiseModel {
        match *self {
            NoiseSpec::None => NoiseModel::exact(),
            NoiseSpec::Gaussian(s2) => NoiseModel::gaussian(s2),
            NoiseSpec::Subsample => NoiseModel::subsample(),
        }
    }

    /// Label used in file names and tables.
    pub fn label(&self) -> String {
        match *self {
            NoiseSpec::None => "none".into(),
            NoiseSpec::Gaussian(s2) => format!("{s2:e}"),
            NoiseSpec::Subsample => "subsample".into(),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for NoiseSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "exact" => Ok(NoiseSpec::None),
            "subsample" => Ok(NoiseSpec::Subsample),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| CliError::Config(format!("noise must be none, subsample or σ², got `{s}`")))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(CliError::Config(format!("σ² must be nonnegative, got {v}")));
                }
                Ok(NoiseSpec::Gaussian(v))
            }
        }
    }
}

impl TryFrom<String> for NoiseSpec {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NoiseSpec> for String {
    fn from(s: NoiseSpec) -> String {
        s.label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Beta(pub BetaSchedule);

impl TryFrom<String> for Beta {
    type Error = CliError;
    fn try_from(s: String) -> Result<Self> {
        Ok(Beta(s.parse()?))
    }
}

impl From<Beta> for String {
    fn from(b: Beta) -> String {
        b.0.to_string()
    }
}

/// One grid point of a plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub problem: String,
    pub solver: SolverSpec,
    pub noise: NoiseSpec,
    pub beta: Beta,
}

impl Cell {
    /// File-name-safe identifier, unique within a plan.
    pub fn key(&self) -> String {
        let raw = format!("{}__{}__{}__{}", self.problem, self.solver, self.noise, self.beta.0);
        raw.chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '-' })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    /// Built-in problem names or `libsvm:<path>`; `all` expands to every
    /// built-in problem.
    pub problems: Vec<String>,
    pub solvers: Vec<SolverSpec>,
    pub noise: Vec<NoiseSpec>,
    pub betas: Vec<Beta>,
    pub seeds: u64,
    pub base_seed: u64,
    pub max_iter: usize,
    pub kkt_tol: f64,
    /// Iteration budget for finite-sum problems, in passes over the data.
    pub epochs: Option<usize>,
    /// Rows of the logistic-regression constraint matrix.
    pub logreg_m: usize,
    pub out: Option<PathBuf>,
    /// Include per-iteration wall time in traces (breaks byte determinism).
    pub timing: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            problems: Vec::new(),
            solvers: vec![SolverSpec::Tr(HessianKind::Id)],
            noise: vec![NoiseSpec::Gaussian(1e-4)],
            betas: vec![Beta(BetaSchedule::Constant(0.5))],
            seeds: 5,
            base_seed: 0,
            max_iter: 100_000,
            kkt_tol: 1e-4,
            epochs: None,
            logreg_m: 5,
            out: None,
            timing: false,
        }
    }
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, n: usize| {
            if n == 0 {
                Err(CliError::Config(format!("plan has no {name}")))
            } else {
                Ok(())
            }
        };
        empty("problems", self.problems.len())?;
        empty("solvers", self.solvers.len())?;
        empty("noise levels", self.noise.len())?;
        empty("beta schedules", self.betas.len())?;
        if self.seeds == 0 {
            return Err(CliError::Config("seeds must be positive".into()));
        }
        if !(self.kkt_tol >= 0.0) {
            return Err(CliError::Config(format!("kkt_tol must be nonnegative, got {}", self.kkt_tol)));
        }
        for b in &self.betas {
            b.0.validate()?;
        }
        Ok(())
    }

    /// Problem list with `all` expanded, duplicates removed.
    pub fn problem_names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in &self.problems {
            let names = if p.eq_ignore_ascii_case("all") {
                trsqp_core::builtin_names().into_iter().map(String::from).collect()
            } else {
                vec![p.clone()]
            };
            for n in names {
                if !out.contains(&n) {
                    out.push(n);
                }
            }
        }
        out
    }

    /// Cells in problem, solver, noise, β order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for p in &self.problem_names() {
            for s in &self.solvers {
                for n in &self.noise {
                    for b in &self.betas {
                        out.push(Cell {
                            problem: p.clone(),
                            solver: *s,
                            noise: *n,
                            beta: *b,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds).map(|i| self.base_seed + i).collect()
    }
}
