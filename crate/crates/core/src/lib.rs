//! Fully stochastic trust-region SQP for equality-constrained problems.
//!
//! Solves `min f(x) s.t. c(x) = 0` when only stochastic estimates of `∇f` are
//! available. Each iteration draws one gradient sample, sets a trust-region
//! radius from a prescribed sequence `β_k` and the estimated KKT residual, and
//! splits it between a normal step (feasibility) and a tangential trust-region
//! subproblem (optimality) via adaptive relaxation. An ℓ1-penalty line-search
//! method is included for comparison.
//!
//! ```
//! use trsqp_core::{run, NoiseModel, QuadraticProblem, SolverConfig};
//!
//! let p = QuadraticProblem::fixture_small();
//! let rec = run(&p, &NoiseModel::exact(), &SolverConfig { max_iter: 5000, ..Default::default() }).unwrap();
//! assert!(rec.final_kkt.total <= 1e-4);
//! ```

pub mod baseline;
pub mod error;
pub mod geometry;
pub mod hessian;
pub mod libsvm;
pub mod oracle;
pub mod problem;
pub mod problems;
pub mod relax;
pub mod trace;
pub mod trsqp;
pub mod trsub;

pub use baseline::{run_baseline, BaselineConfig};
pub use error::{Error, Result};
pub use geometry::{factorize, ConstraintFactorization};
pub use hessian::HessianKind;
pub use libsvm::{parse_libsvm, parse_libsvm_str, write_libsvm, Dataset};
pub use oracle::{NoiseKind, NoiseModel};
pub use problem::{eval_kkt, FiniteSum, KktResidual, Problem};
pub use problems::{builtin_names, make_hs_problem, make_logreg_problem, LogRegProblem, QuadraticProblem};
pub use trace::{IterRow, RunRecord, RunStatus, TRACE_COLUMNS, TRACE_SCHEMA_VERSION};
pub use trsqp::{run, BetaSchedule, SolverConfig};
pub use trsub::TrsMethod;
