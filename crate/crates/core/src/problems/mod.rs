//! Built-in test problems.

pub mod hs;
pub mod logreg;
pub mod quadratic;

use crate::error::{Error, Result};
use crate::problem::Problem;

pub use hs::{HsKind, HsProblem};
pub use logreg::{make_logreg_problem, LogRegProblem};
pub use quadratic::QuadraticProblem;

/// Names of the analytic nonlinear problems.
pub fn cutest_subset() -> Vec<&'static str> {
    HsKind::ALL.iter().map(|k| k.name()).collect()
}

/// Every name accepted by [`make_hs_problem`].
pub fn builtin_names() -> Vec<&'static str> {
    let mut names = cutest_subset();
    names.extend(["QUAD3", "QUAD6"]);
    names
}

/// Looks up a built-in problem by (case-insensitive) name.
pub fn make_hs_problem(name: &str) -> Result<Box<dyn Problem>> {
    if let Some(kind) = HsKind::from_name(name) {
        return Ok(Box::new(HsProblem::new(kind)));
    }
    match name.to_ascii_uppercase().as_str() {
        "QUAD3" => Ok(Box::new(QuadraticProblem::fixture_small())),
        "QUAD6" => Ok(Box::new(QuadraticProblem::fixture_medium())),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}
