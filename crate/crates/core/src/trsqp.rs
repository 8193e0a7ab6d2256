//! The fully stochastic trust-region SQP loop.
//!
//! Per iteration: build `B_k` and the control parameters, draw `ḡ_k`, pick the
//! radius from the estimated KKT residual, assemble the relaxed step, move, and
//! raise the merit parameter until the predicted reduction is sufficient.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{factorize, ConstraintFactorization};
use crate::hessian::{HessianKind, HessianStrategy, IterationInfo};
use crate::oracle::{
    estimate_lipschitz, sample_gradient, sample_hessian, NoiseModel, RngStreams, LIPSCHITZ_PROBES,
    LIPSCHITZ_PROBE_DELTA,
};
use crate::problem::{lagrangian_hessian, KktResidual, Problem};
use crate::relax::{assemble_step, split_radius};
use crate::trace::{InvariantViolation, IterRow, RunRecord, RunStatus};
use crate::trsub::{symmetric_norm, TrsMethod};

/// Guard on merit-parameter increases within one iteration; overflow of `μ̄`
/// also trips it.
pub const MERIT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum BetaSchedule {
    /// `β_k = β`, with `β_max = β`.
    Constant(f64),
    /// `β_k = k^{−s}` for `k ≥ 1`, `β_0 = 1`, with `β_max = 1`.
    Power(f64),
}

impl BetaSchedule {
    pub fn beta_max(&self) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Power(_) => 1.0,
        }
    }

    pub fn beta(&self, k: usize) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Power(s) => {
                if k == 0 {
                    1.0f64.min(self.beta_max())
                } else {
                    (k as f64).powf(-s)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaSchedule::Constant(b) if !(b > 0.0 && b.is_finite()) => {
                Err(Error::Config(format!("constant β must be positive, got {b}")))
            }
            BetaSchedule::Power(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::Config(format!("power exponent must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for BetaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaSchedule::Constant(b) => write!(f, "const:{b}"),
            BetaSchedule::Power(s) => write!(f, "pow:{s}"),
        }
    }
}

impl FromStr for BetaSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("β schedule must be const:<β> or pow:<s>, got `{s}`"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        let sched = match kind.trim() {
            "const" => BetaSchedule::Constant(value),
            "pow" => BetaSchedule::Power(value),
            _ => return Err(bad()),
        };
        sched.validate()?;
        Ok(sched)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub zeta: f64,
    pub mu_init: f64,
    pub rho: f64,
    pub beta: BetaSchedule,
    pub max_iter: usize,
    pub kkt_tol: f64,
    pub hessian: HessianKind,
    /// `None` picks [`TrsMethod::default_for`] the problem dimension.
    pub trsub: Option<TrsMethod>,
    pub seed: u64,
    /// Evaluate the per-iteration invariants and record violations.
    pub check_invariants: bool,
    /// Abort the run on the first invariant violation.
    pub strict: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            zeta: 10.0,
            mu_init: 1.0,
            rho: 1.5,
            beta: BetaSchedule::Constant(1.0),
            max_iter: 100_000,
            kkt_tol: 1e-4,
            hessian: HessianKind::Id,
            trsub: None,
            seed: 0,
            check_invariants: true,
            strict: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("zeta", self.zeta)?;
        positive("mu_init", self.mu_init)?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.kkt_tol >= 0.0) {
            return Err(Error::Config(format!("kkt_tol must be nonnegative, got {}", self.kkt_tol)));
        }
        self.beta.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    pub eta1: f64,
    pub eta2: f64,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub norm_b: f64,
    pub norm_g: f64,
}

/// Control parameters for iteration `k`; takes no gradient sample by design.
#[allow(clippy::too_many_arguments)]
pub fn control_params(
    zeta: f64,
    beta_k: f64,
    beta_max: f64,
    norm_b: f64,
    norm_g: f64,
    l_grad: f64,
    l_jac: f64,
    mu_prev: f64,
) -> ControlParams {
    let inv_b = if norm_b > 0.0 { 1.0 / norm_b } else { f64::INFINITY };
    let eta1 = zeta * inv_b.min(6.0 * beta_max / norm_g);
    let tau = l_grad + l_jac * mu_prev + norm_b;
    let alpha = beta_k / ((4.0 * eta1 * tau + 6.0 * zeta) * beta_max);
    let eta2 = eta1 - 0.5 * zeta * eta1 * alpha;
    ControlParams {
        eta1,
        eta2,
        tau,
        alpha,
        beta: beta_k,
        norm_b,
        norm_g,
    }
}

/// Trust-region radius and the branch (1, 2, 3) that produced it.
pub fn radius(cp: &ControlParams, est_kkt: f64) -> Result<(f64, u8)> {
    if !(est_kkt > 0.0) {
        return Err(Error::Contract(format!("radius needs a positive estimated residual, got {est_kkt}")));
    }
    Ok(if est_kkt < 1.0 / cp.eta1 {
        (cp.eta1 * cp.alpha * est_kkt, 1)
    } else if est_kkt <= 1.0 / cp.eta2 {
        (cp.alpha, 2)
    } else {
        (cp.eta2 * cp.alpha * est_kkt, 3)
    })
}

/// `ḡᵀΔx + ½ΔxᵀBΔx + μ̄(‖c + GΔx‖ − ‖c‖)`.
pub fn predicted_reduction(
    gbar: &DVector<f64>,
    b: &DMatrix<f64>,
    mu: f64,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    dx: &DVector<f64>,
) -> f64 {
    gbar.dot(dx) + 0.5 * dx.dot(&(b * dx)) + mu * ((c + g * dx).norm() - c.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeritState {
    pub mu: f64,
    pub n_increases: usize,
    pub last_increase_iter: Option<usize>,
}

impl MeritState {
    pub fn new(mu: f64) -> Self {
        Self {
            mu,
            n_increases: 0,
            last_increase_iter: None,
        }
    }
}

/// Multiplies `μ̄` by `rho` until `pred(μ̄) ≤ bound + slack`.
pub fn update_merit<F: Fn(f64) -> f64>(
    ms: MeritState,
    rho: f64,
    pred: F,
    bound: f64,
    slack: f64,
    iter: usize,
) -> Result<MeritState> {
    let mut out = ms;
    let mut count = 0usize;
    while pred(out.mu) > bound + slack {
        if count == MERIT_CAP || !(out.mu * rho).is_finite() {
            return Err(Error::MeritCap { cap: MERIT_CAP, iter });
        }
        out.mu *= rho;
        count += 1;
    }
    if count > 0 {
        out.n_increases += count;
        out.last_increase_iter = Some(iter);
    }
    Ok(out)
}

/// Observed constants bounding the control parameters over a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterBounds {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa_b: f64,
    pub tau_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
    pub alpha_l: f64,
    pub alpha_u: f64,
    /// Every row satisfied `η_min ≤ η₂ ≤ η₁ ≤ η_max` and
    /// `α_l β_k ≤ α_k ≤ α_u β_k`.
    pub holds: bool,
}

/// Computes the run's parameter bounds from its trace and checks every row.
pub fn parameter_bounds(rows: &[IterRow], zeta: f64, beta_max: f64) -> Option<ParameterBounds> {
    if rows.is_empty() {
        return None;
    }
    let kappa1 = rows.iter().map(|r| r.sigma_min_g * r.sigma_min_g).fold(f64::INFINITY, f64::min);
    let kappa2 = rows.iter().map(|r| r.norm_g * r.norm_g).fold(0.0, f64::max);
    let kappa_b = rows.iter().map(|r| r.norm_b).fold(0.0, f64::max);
    let tau_max = rows.iter().map(|r| r.tau).fold(0.0, f64::max);
    let inv_b = if kappa_b > 0.0 { 1.0 / kappa_b } else { f64::INFINITY };
    let eta_max = 6.0 * zeta * beta_max / kappa1.sqrt();
    let eta_min = 11.0 / 12.0 * zeta * inv_b.min(6.0 * beta_max / kappa2.sqrt());
    let alpha_u = 1.0 / (6.0 * zeta * beta_max);
    let alpha_l = 1.0 / (4.0 * eta_max * tau_max * beta_max + 6.0 * zeta * beta_max);
    let tol = 1.0 + 1e-12;
    let holds = rows.iter().all(|r| {
        eta_min <= r.eta2 * tol
            && r.eta2 <= r.eta1 * tol
            && r.eta1 <= eta_max * tol
            && alpha_l * r.beta <= r.alpha * tol
            && r.alpha <= alpha_u * r.beta * tol
    });
    Some(ParameterBounds {
        kappa1,
        kappa2,
        kappa_b,
        tau_max,
        eta_min,
        eta_max,
        alpha_l,
        alpha_u,
        holds,
    })
}

struct Checker<'a> {
    enabled: bool,
    k: usize,
    out: &'a mut Vec<InvariantViolation>,
}

impl Checker<'_> {
    fn check(&mut self, ok: bool, name: &'static str, detail: impl FnOnce() -> String) {
        if self.enabled && !ok {
            self.out.push(InvariantViolation {
                k: self.k,
                name,
                detail: detail(),
            });
        }
    }
}

/// Exact KKT residual at `x` with the least-squares multiplier.
pub fn true_kkt(problem: &dyn Problem, x: &DVector<f64>, fac: &ConstraintFactorization) -> KktResidual {
    let g = problem.gradient(x);
    let opt = fac.project_null(&g).norm();
    KktResidual::from_parts(opt, problem.constraints(x).norm())
}

/// Runs TR-StoSQP from the problem's initial point.
pub fn run(problem: &dyn Problem, noise: &NoiseModel, config: &SolverConfig) -> Result<RunRecord> {
    config.validate()?;
    noise.validate()?;
    crate::problem::validate(problem)?;
    if config.hessian.needs_sample() && !problem.has_hessian() {
        return Err(Error::Capability(format!(
            "{} needs Hessians, which {} does not provide",
            config.hessian,
            problem.name()
        )));
    }
    let d = problem.dim_x();
    let method = config.trsub.unwrap_or(TrsMethod::default_for(d));
    let mut streams = RngStreams::new(config.seed);
    let mut x = problem.initial_point();
    let (l_grad, l_jac) =
        estimate_lipschitz(problem, &x, LIPSCHITZ_PROBES, LIPSCHITZ_PROBE_DELTA, &mut streams.probing)?;
    let mut strategy = HessianStrategy::new(config.hessian, d);
    let mut merit = MeritState::new(config.mu_init);
    let mut rows = Vec::new();
    let mut violations = Vec::new();

    let mut k = 0usize;
    let status = loop {
        let started = Instant::now();
        let jac = problem.jacobian(&x);
        let fac = match factorize(jac) {
            Ok(f) => f,
            Err(e) => break RunStatus::Failed(format!("iteration {k}: {e}")),
        };
        let kkt = true_kkt(problem, &x, &fac);
        if !kkt.total.is_finite() {
            break RunStatus::Failed(format!("iteration {k}: non-finite KKT residual"));
        }
        if kkt.total <= config.kkt_tol {
            break RunStatus::Converged;
        }
        if k >= config.max_iter {
            break RunStatus::BudgetExhausted;
        }
        match iterate(
            problem, noise, config, method, &mut streams, &mut strategy, &mut merit, &fac, &mut x, k,
            (l_grad, l_jac), kkt, &mut violations,
        ) {
            Ok(Some(mut row)) => {
                row.wall_ns = started.elapsed().as_nanos() as u64;
                rows.push(row);
            }
            Ok(None) => break RunStatus::ZeroEstimatedResidual,
            Err(e) => break RunStatus::Failed(format!("iteration {k}: {e}")),
        }
        if config.strict && !violations.is_empty() {
            let v = &violations[0];
            break RunStatus::Failed(format!("invariant {} violated at iteration {}: {}", v.name, v.k, v.detail));
        }
        k += 1;
    };

    let final_kkt = factorize(problem.jacobian(&x))
        .map(|fac| true_kkt(problem, &x, &fac))
        .unwrap_or(KktResidual::from_parts(f64::NAN, problem.constraints(&x).norm()));
    Ok(RunRecord {
        problem: problem.name().to_string(),
        solver: format!("tr-{}", config.hessian),
        seed: config.seed,
        rows,
        status,
        final_objective: problem.objective(&x),
        final_x: x.iter().copied().collect(),
        final_kkt,
        merit_increases: merit.n_increases,
        last_merit_increase: merit.last_increase_iter,
        sr1_skips: strategy.sr1_skips(),
        lipschitz_grad: l_grad,
        lipschitz_jac: l_jac,
        violations,
    })
}

#[allow(clippy::too_many_arguments)]
fn iterate(
    problem: &dyn Problem,
    noise: &NoiseModel,
    config: &SolverConfig,
    method: TrsMethod,
    streams: &mut RngStreams,
    strategy: &mut HessianStrategy,
    merit: &mut MeritState,
    fac: &ConstraintFactorization,
    x: &mut DVector<f64>,
    k: usize,
    (l_grad, l_jac): (f64, f64),
    kkt: KktResidual,
    violations: &mut Vec<InvariantViolation>,
) -> Result<Option<IterRow>> {
    // Step 1: B_k and control parameters, before the gradient draw.
    let b = strategy.produce(k)?;
    let norm_b = symmetric_norm(&b);
    let beta_k = config.beta.beta(k);
    let beta_max = config.beta.beta_max();
    let cp = control_params(config.zeta, beta_k, beta_max, norm_b, fac.spectral_norm(), l_grad, l_jac, merit.mu);

    // Step 2: gradient draw and estimated residuals.
    let est = sample_gradient(noise, problem, x, &mut streams.gradient)?;
    let gbar = &est.gbar;
    let lambda = fac.ls_multiplier(gbar);
    let lag = fac.project_null(gbar);
    let c = problem.constraints(x);
    let (opt_est, feas) = (lag.norm(), c.norm());
    let est_kkt = opt_est.hypot(feas);
    let sampled = if config.hessian.needs_sample() {
        let h = sample_hessian(noise, problem, x, est.sample_id, &mut streams.hessian)?;
        Some(lagrangian_hessian(problem, x, h, &lambda)?)
    } else {
        None
    };
    strategy.record(IterationInfo {
        k,
        x,
        lagrangian_gradient: &lag,
        lagrangian_hessian: sampled.as_ref(),
    })?;
    if est_kkt == 0.0 {
        return Ok(None);
    }

    // Step 3: radius, relaxed step, merit update.
    let (delta, case) = radius(&cp, est_kkt)?;
    let split = split_radius(delta, feas, opt_est)?;
    let step = assemble_step(fac, gbar, &c, &b, &split, method)?;
    let dx = &step.trial;
    let jac = fac.jacobian();
    let (dt, df) = (split.delta_opt, split.delta_feas);
    let bound = -opt_est * dt - 0.5 * feas * df + 0.5 * norm_b * dt * dt + norm_b * df * dt;
    let lin_quad = gbar.dot(dx) + 0.5 * dx.dot(&(&b * dx));
    let lin_feas = (&c + jac * dx).norm();
    let slack = 1e-10
        * (gbar.dot(dx).abs()
            + 0.5 * dx.dot(&(&b * dx)).abs()
            + opt_est * dt
            + 0.5 * feas * df
            + 0.5 * norm_b * dt * dt
            + norm_b * df * dt);
    let pred = |mu: f64| lin_quad + mu * (lin_feas - feas);
    let mu_before = merit.mu;
    let increases_before = merit.n_increases;
    *merit = update_merit(*merit, config.rho, pred, bound, slack, k)?;
    *x += dx;

    let mut chk = Checker {
        enabled: config.check_invariants,
        k,
        out: violations,
    };
    let tol = 1.0 + 1e-10;
    chk.check(dx.norm() <= delta * tol, "step_in_region", || format!("‖Δx‖ = {:e}, Δ = {delta:e}", dx.norm()));
    let split_err = (df * df + dt * dt - delta * delta).abs();
    chk.check(split_err <= 1e-12 * delta * delta, "radius_split", || format!("|Δ̆²+Δ̃²−Δ²| = {split_err:e}"));
    let feas_scale = feas + fac.spectral_norm() * dx.norm();
    let feas_err = (lin_feas - (1.0 - step.gamma) * feas).abs();
    chk.check(feas_err <= 1e-10 * feas_scale.max(f64::MIN_POSITIVE), "feasibility_identity", || {
        format!("‖c+GΔx‖ = {lin_feas:e}, (1−γ̄)‖c‖ = {:e}", (1.0 - step.gamma) * feas)
    });
    let m = step.subproblem.model_reduction;
    let cauchy_bound = -opt_est * dt + 0.5 * norm_b * dt * dt;
    chk.check(m <= cauchy_bound + 1e-10 * (1.0 + m.abs()), "cauchy_decrease", || {
        format!("m(u) = {m:e} > {cauchy_bound:e}")
    });
    chk.check(pred(merit.mu) <= bound + slack, "merit_condition", || {
        format!("Pred = {:e} > {bound:e}", pred(merit.mu))
    });
    chk.check(cp.eta2 <= cp.eta1, "eta_order", || format!("η₂ = {} > η₁ = {}", cp.eta2, cp.eta1));
    chk.check(merit.mu >= mu_before, "merit_monotone", || format!("μ̄ {mu_before} → {}", merit.mu));
    chk.check((0.0..=1.0).contains(&step.gamma), "gamma_range", || format!("γ̄ = {}", step.gamma));
    let alpha_u = 1.0 / (6.0 * config.zeta * beta_max);
    let order = cp.eta1 * alpha_u * beta_k * est_kkt;
    chk.check(delta <= order * (1.0 + 1e-12), "radius_order", || format!("Δ = {delta:e} > {order:e}"));

    Ok(Some(IterRow {
        k,
        true_kkt: kkt.total,
        est_kkt,
        feas: kkt.feasibility,
        opt: kkt.optimality,
        delta,
        delta_feas: df,
        delta_opt: dt,
        gamma: step.gamma,
        case,
        mu: merit.mu,
        norm_b,
        eta1: cp.eta1,
        eta2: cp.eta2,
        alpha: cp.alpha,
        tau: cp.tau,
        beta: beta_k,
        norm_g: cp.norm_g,
        sigma_min_g: fac.min_gram_eigenvalue().sqrt(),
        merit_increases: merit.n_increases - increases_before,
        wall_ns: 0,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{HsKind, HsProblem, QuadraticProblem};

    #[test]
    fn control_params_by_hand() {
        let cp = control_params(10.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0);
        assert_eq!(cp.eta1, 10.0);
        assert_eq!(cp.tau, 3.0);
        assert_eq!(cp.alpha, 1.0 / 180.0);
        assert!((cp.eta2 - (10.0 - 5.0 / 18.0)).abs() < 1e-14);
        // ‖B‖ = 0 takes the Jacobian branch
        let cp = control_params(10.0, 1.0, 1.0, 0.0, 2.0, 1.0, 1.0, 1.0);
        assert_eq!(cp.eta1, 30.0);
    }

    #[test]
    fn control_params_small_beta_limit() {
        let cp = control_params(10.0, 1e-12, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0);
        assert!(cp.alpha < 1e-14);
        assert!((cp.eta2 - cp.eta1).abs() < 1e-12);
    }

    #[test]
    fn control_params_match_scalar_recomputation() {
        for i in 0..50 {
            let t = i as f64;
            let (zeta, beta_max) = (1.0 + t % 7.0, 0.5 + (t * 0.37).sin().abs());
            let beta = beta_max * (0.1 + 0.9 * (t * 0.11).cos().abs());
            let (nb, ng, lg, lj, mu) = (0.1 + t * 0.3, 0.5 + t * 0.05, 1.0 + (t * 1.3).sin().abs(), 0.2 + t * 0.01, 1.5f64.powi(i % 5));
            let cp = control_params(zeta, beta, beta_max, nb, ng, lg, lj, mu);
            let e1 = zeta * f64::min(1.0 / nb, 6.0 * beta_max / ng);
            let ta = lg + lj * mu + nb;
            let al = beta / ((4.0 * e1 * ta + 6.0 * zeta) * beta_max);
            let e2 = e1 - 0.5 * zeta * e1 * al;
            for (a, b) in [(cp.eta1, e1), (cp.tau, ta), (cp.alpha, al), (cp.eta2, e2)] {
                assert!((a - b).abs() <= 1e-14 * b.abs());
            }
            assert!(cp.eta2 <= cp.eta1);
        }
    }

    #[test]
    fn radius_cases() {
        let cp = ControlParams {
            eta1: 2.0,
            eta2: 1.0,
            tau: 1.0,
            alpha: 0.1,
            beta: 1.0,
            norm_b: 1.0,
            norm_g: 1.0,
        };
        assert_eq!(radius(&cp, 0.25).unwrap(), (0.05, 1));
        assert_eq!(radius(&cp, 0.75).unwrap(), (0.1, 2));
        assert_eq!(radius(&cp, 2.0).unwrap(), (0.2, 3));
        assert!(radius(&cp, 0.0).is_err());
    }

    #[test]
    fn predicted_reduction_examples() {
        let z = DMatrix::zeros(2, 2);
        let g = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let c0 = DVector::zeros(1);
        let gbar = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(predicted_reduction(&gbar, &z, 3.0, &c0, &g, &DVector::zeros(2)), 0.0);
        let dx = DVector::from_vec(vec![-1.0, 0.0]);
        assert_eq!(predicted_reduction(&gbar, &z, 7.0, &c0, &g, &dx), -1.0);
        // term-by-term recomputation
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, -1.0]);
        let c = DVector::from_vec(vec![0.7]);
        let dx = DVector::from_vec(vec![0.3, -0.4]);
        let expect = (1.0 * 0.3) + 0.5 * (2.0 * 0.09 + 2.0 * 0.5 * 0.3 * -0.4 + -1.0 * 0.16) + 2.0 * ((0.7f64 - 0.4).abs() - 0.7);
        assert!((predicted_reduction(&gbar, &b, 2.0, &c, &g, &dx) - expect).abs() <= 1e-12);
    }

    #[test]
    fn merit_unchanged_when_condition_holds() {
        let ms = MeritState::new(1.0);
        let out = update_merit(ms, 1.5, |_| -1.0, -1.0, 0.0, 0).unwrap();
        assert_eq!(out, ms);
    }

    #[test]
    fn merit_smallest_rho_power() {
        // Pred(μ) = 5 − 2μ ≤ −1 needs μ ≥ 3
        let ms = MeritState::new(1e-3);
        let out = update_merit(ms, 1.5, |mu| 5.0 - 2.0 * mu, -1.0, 0.0, 4).unwrap();
        let mut scan = 1e-3;
        let mut n = 0;
        while 5.0 - 2.0 * scan > -1.0 {
            scan *= 1.5;
            n += 1;
        }
        assert_eq!(out.mu, scan);
        assert_eq!(out.n_increases, n);
        assert_eq!(out.last_increase_iter, Some(4));
        assert!(out.mu / 1.5 < 3.0);
    }

    #[test]
    fn merit_cap_reported() {
        let err = update_merit(MeritState::new(1.0), 1.5, |_| 1.0, 0.0, 0.0, 9).unwrap_err();
        assert_eq!(err, Error::MeritCap { cap: MERIT_CAP, iter: 9 });
    }

    #[test]
    fn beta_schedules() {
        let p = BetaSchedule::Power(0.5);
        assert_eq!(p.beta(0), 1.0);
        assert_eq!(p.beta(4), 0.5);
        assert_eq!(p.beta_max(), 1.0);
        let c: BetaSchedule = "const:0.5".parse().unwrap();
        assert_eq!(c, BetaSchedule::Constant(0.5));
        assert_eq!(c.beta(10), 0.5);
        assert_eq!("pow:0.8".parse::<BetaSchedule>().unwrap().to_string(), "pow:0.8");
        assert!("const:-1".parse::<BetaSchedule>().is_err());
        assert!("exp:1".parse::<BetaSchedule>().is_err());
    }

    #[test]
    fn zero_budget() {
        let p = QuadraticProblem::fixture_small();
        let cfg = SolverConfig { max_iter: 0, ..Default::default() };
        let rec = run(&p, &NoiseModel::exact(), &cfg).unwrap();
        assert!(rec.rows.is_empty());
        assert_eq!(rec.status, RunStatus::BudgetExhausted);
    }

    #[test]
    fn deterministic_quadratic_converges() {
        let p = QuadraticProblem::fixture_medium();
        let (xs, _) = p.kkt_solution();
        for kind in HessianKind::ALL {
            let cfg = SolverConfig {
                hessian: kind,
                kkt_tol: 1e-7,
                max_iter: 5000,
                ..Default::default()
            };
            let rec = run(&p, &NoiseModel::exact(), &cfg).unwrap();
            assert_eq!(rec.status, RunStatus::Converged, "{kind}");
            assert!(rec.violations.is_empty(), "{kind}: {:?}", rec.violations.first());
            let x = DVector::from_vec(rec.final_x.clone());
            assert!((x - &xs).amax() <= 1e-5, "{kind}");
        }
    }

    #[test]
    fn noisy_run_is_reproducible_and_clean() {
        let p = HsProblem::new(HsKind::Hs42);
        let cfg = SolverConfig {
            hessian: HessianKind::AveH,
            beta: BetaSchedule::Power(0.6),
            max_iter: 300,
            seed: 17,
            ..Default::default()
        };
        let noise = NoiseModel::gaussian(1e-2);
        let a = run(&p, &noise, &cfg).unwrap();
        let b = run(&p, &noise, &cfg).unwrap();
        assert_eq!(a.final_x, b.final_x);
        assert!(a.violations.is_empty(), "{:?}", a.violations.first());
        let mus: Vec<f64> = a.rows.iter().map(|r| r.mu).collect();
        assert!(mus.windows(2).all(|w| w[1] >= w[0]));
        let bounds = parameter_bounds(&a.rows, cfg.zeta, cfg.beta.beta_max()).unwrap();
        assert!(bounds.holds, "{bounds:?}");
    }

    #[test]
    fn hessian_kinds_need_oracles() {
        struct NoHess(QuadraticProblem);
        impl Problem for NoHess {
            fn name(&self) -> &str {
                "nohess"
            }
            fn dim_x(&self) -> usize {
                self.0.dim_x()
            }
            fn dim_c(&self) -> usize {
                self.0.dim_c()
            }
            fn objective(&self, x: &DVector<f64>) -> f64 {
                self.0.objective(x)
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                self.0.gradient(x)
            }
            fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
                self.0.constraints(x)
            }
            fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
                self.0.jacobian(x)
            }
            fn initial_point(&self) -> DVector<f64> {
                self.0.initial_point()
            }
        }
        let p = NoHess(QuadraticProblem::fixture_small());
        let cfg = SolverConfig { hessian: HessianKind::EstH, ..Default::default() };
        assert!(matches!(run(&p, &NoiseModel::exact(), &cfg), Err(Error::Capability(_))));
        let cfg = SolverConfig { hessian: HessianKind::Sr1, max_iter: 10, ..Default::default() };
        assert!(run(&p, &NoiseModel::exact(), &cfg).is_ok());
    }
}
