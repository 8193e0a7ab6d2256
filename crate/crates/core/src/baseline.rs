//! Line-search ℓ1-penalty stochastic SQP used as the comparison method.
//!
//! Each iteration solves the SQP subproblem with `B = I` exactly, so
//! `Δx = −Pḡ + v`, raises the ℓ1 penalty `ν̄` until the model reduction is
//! positive, and moves by a stepsize clamped into `[β_k, β_k + β_k²]`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::geometry::{factorize, ConstraintFactorization};
use crate::oracle::{estimate_lipschitz, sample_gradient, NoiseModel, RngStreams, LIPSCHITZ_PROBES, LIPSCHITZ_PROBE_DELTA};
use crate::problem::{KktResidual, Problem};
use crate::trace::{IterRow, RunRecord, RunStatus};
use crate::trsqp::{true_kkt, BetaSchedule, MERIT_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub beta: BetaSchedule,
    /// Initial ℓ1 penalty `ν̄₋₁`.
    pub nu_init: f64,
    /// Factor applied to `ν̄` while the model reduction test fails.
    pub nu_factor: f64,
    pub max_iter: usize,
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            beta: BetaSchedule::Constant(1.0),
            nu_init: 1.0,
            nu_factor: 1.5,
            max_iter: 100_000,
            kkt_tol: 1e-4,
            seed: 0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu_init > 0.0 && self.nu_init.is_finite()) {
            return Err(Error::Config(format!("nu_init must be positive and finite, got {}", self.nu_init)));
        }
        if !(self.nu_factor > 1.0 && self.nu_factor.is_finite()) {
            return Err(Error::Config(format!("nu_factor must exceed 1, got {}", self.nu_factor)));
        }
        if !(self.kkt_tol >= 0.0) {
            return Err(Error::Config(format!("kkt_tol must be nonnegative, got {}", self.kkt_tol)));
        }
        self.beta.validate()
    }
}

/// Solution of `[I Gᵀ; G 0](Δx, λ) = (−ḡ, −c)`, i.e. `Δx = −Pḡ + v`.
pub fn newton_kkt_step(fac: &ConstraintFactorization, c: &DVector<f64>, gbar: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("newton_kkt_step: c", fac.dim_c(), c.len())?;
    check_len("newton_kkt_step: gbar", fac.dim_x(), gbar.len())?;
    Ok(fac.normal_direction(c) - fac.project_null(gbar))
}

/// Dense-matrix convenience wrapper around [`newton_kkt_step`].
pub fn newton_kkt_step_dense(g: &DMatrix<f64>, c: &DVector<f64>, gbar: &DVector<f64>) -> Result<DVector<f64>> {
    newton_kkt_step(&factorize(g.clone())?, c, gbar)
}

/// `clamp(ratio, β_k, β_k + β_k²)`.
pub fn projected_stepsize(beta_k: f64, reduction_ratio: f64) -> f64 {
    let hi = beta_k + beta_k * beta_k;
    if reduction_ratio.is_nan() {
        return beta_k;
    }
    reduction_ratio.clamp(beta_k, hi)
}

/// `ν̄` after raising it until `−ḡᵀΔx − ½‖Δx‖² + ½ν̄‖c‖₁ ≥ 0`, and the number
/// of increases.
pub fn update_penalty(nu: f64, factor: f64, gdx: f64, dx_sq: f64, c_l1: f64, iter: usize) -> Result<(f64, usize)> {
    let mut nu = nu;
    let mut count = 0usize;
    while -gdx - 0.5 * dx_sq + 0.5 * nu * c_l1 < 0.0 {
        if count == MERIT_CAP || !(nu * factor).is_finite() {
            return Err(Error::MeritCap { cap: MERIT_CAP, iter });
        }
        nu *= factor;
        count += 1;
    }
    Ok((nu, count))
}

/// Candidate stepsize `β_k·Δq/((L_∇f + ν̄L_G)‖Δx‖²)` with
/// `Δq = −ḡᵀΔx + ν̄‖c‖₁`; `β_k` when `Δx = 0`.
pub fn reduction_ratio(beta_k: f64, gdx: f64, dx_sq: f64, c_l1: f64, nu: f64, l_grad: f64, l_jac: f64) -> f64 {
    if dx_sq == 0.0 {
        return beta_k;
    }
    let dq = -gdx + nu * c_l1;
    beta_k * dq / ((l_grad + nu * l_jac) * dx_sq)
}

pub fn run_baseline(problem: &dyn Problem, noise: &NoiseModel, config: &BaselineConfig) -> Result<RunRecord> {
    config.validate()?;
    noise.validate()?;
    crate::problem::validate(problem)?;
    let mut streams = RngStreams::new(config.seed);
    let mut x = problem.initial_point();
    let (l_grad, l_jac) =
        estimate_lipschitz(problem, &x, LIPSCHITZ_PROBES, LIPSCHITZ_PROBE_DELTA, &mut streams.probing)?;
    let mut nu = config.nu_init;
    let mut n_increases = 0usize;
    let mut last_increase = None;
    let mut rows = Vec::new();

    let mut k = 0usize;
    let status = loop {
        let started = Instant::now();
        let fac = match factorize(problem.jacobian(&x)) {
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

        let est = match sample_gradient(noise, problem, &x, &mut streams.gradient) {
            Ok(e) => e,
            Err(e) => break RunStatus::Failed(format!("iteration {k}: {e}")),
        };
        let gbar = &est.gbar;
        let c = problem.constraints(&x);
        let opt_est = fac.project_null(gbar).norm();
        let est_kkt = opt_est.hypot(c.norm());
        if est_kkt == 0.0 {
            break RunStatus::ZeroEstimatedResidual;
        }
        let dx = newton_kkt_step(&fac, &c, gbar)?;
        let gdx = gbar.dot(&dx);
        let dx_sq = dx.norm_squared();
        let c_l1 = c.lp_norm(1);
        let (new_nu, count) = match update_penalty(nu, config.nu_factor, gdx, dx_sq, c_l1, k) {
            Ok(v) => v,
            Err(e) => break RunStatus::Failed(format!("iteration {k}: {e}")),
        };
        nu = new_nu;
        if count > 0 {
            n_increases += count;
            last_increase = Some(k);
        }
        let beta_k = config.beta.beta(k);
        let ratio = reduction_ratio(beta_k, gdx, dx_sq, c_l1, nu, l_grad, l_jac);
        let alpha = projected_stepsize(beta_k, ratio);
        x += &dx * alpha;

        rows.push(IterRow {
            k,
            true_kkt: kkt.total,
            est_kkt,
            feas: kkt.feasibility,
            opt: kkt.optimality,
            delta: alpha * dx_sq.sqrt(),
            delta_feas: f64::NAN,
            delta_opt: f64::NAN,
            gamma: f64::NAN,
            case: 0,
            mu: nu,
            norm_b: 1.0,
            eta1: f64::NAN,
            eta2: f64::NAN,
            alpha,
            tau: f64::NAN,
            beta: beta_k,
            norm_g: fac.spectral_norm(),
            sigma_min_g: fac.min_gram_eigenvalue().sqrt(),
            merit_increases: count,
            wall_ns: started.elapsed().as_nanos() as u64,
        });
        k += 1;
    };

    let final_kkt = factorize(problem.jacobian(&x))
        .map(|fac| true_kkt(problem, &x, &fac))
        .unwrap_or(KktResidual::from_parts(f64::NAN, problem.constraints(&x).norm()));
    Ok(RunRecord {
        problem: problem.name().to_string(),
        solver: "l1".to_string(),
        seed: config.seed,
        rows,
        status,
        final_objective: problem.objective(&x),
        final_x: x.iter().copied().collect(),
        final_kkt,
        merit_increases: n_increases,
        last_merit_increase: last_increase,
        sr1_skips: 0,
        lipschitz_grad: l_grad,
        lipschitz_jac: l_jac,
        violations: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use proptest::prelude::*;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn newton_step_examples() {
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let dx = newton_kkt_step_dense(&g, &vec(&[2.0]), &vec(&[3.0, 4.0])).unwrap();
        assert_eq!(dx, vec(&[-2.0, -4.0]));
        let dx = newton_kkt_step_dense(&g, &vec(&[0.0]), &vec(&[0.0, 1.5])).unwrap();
        assert_eq!(dx, vec(&[0.0, -1.5]));
    }

    #[test]
    fn newton_step_rank_deficient() {
        let g = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0]);
        assert!(matches!(
            newton_kkt_step_dense(&g, &vec(&[1.0, 1.0]), &vec(&[1.0, 1.0, 1.0])),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn stepsize_clamp() {
        assert_eq!(projected_stepsize(0.5, 0.1), 0.5);
        assert_eq!(projected_stepsize(0.5, 3.0), 0.75);
        assert_eq!(projected_stepsize(0.5, 0.625), 0.625);
        assert_eq!(projected_stepsize(0.5, f64::NAN), 0.5);
    }

    #[test]
    fn penalty_only_grows_when_needed() {
        // c = 0 and Δx = −Pḡ: −ḡᵀΔx − ½‖Δx‖² = ½‖Pḡ‖² ≥ 0
        assert_eq!(update_penalty(1.0, 1.5, -4.0, 4.0, 0.0, 0).unwrap(), (1.0, 0));
        let (nu, count) = update_penalty(1.0, 1.5, 3.0, 2.0, 1.0, 0).unwrap();
        assert!(count > 0 && -3.0 - 1.0 + 0.5 * nu >= 0.0 && -3.0 - 1.0 + 0.5 * nu / 1.5 < 0.0);
        assert!(matches!(update_penalty(1.0, 1.5, 1.0, 0.0, 0.0, 4), Err(Error::MeritCap { iter: 4, .. })));
    }

    #[test]
    fn deterministic_quadratic_reaches_kkt_solution() {
        let p = QuadraticProblem::fixture_medium();
        // the unscaled interval [β, β+β²] needs β(1+β)·λ_max(Q) < 2 here
        let cfg = BaselineConfig {
            beta: BetaSchedule::Constant(0.1),
            max_iter: 5000,
            kkt_tol: 1e-8,
            ..Default::default()
        };
        let r = run_baseline(&p, &NoiseModel::exact(), &cfg).unwrap();
        assert_eq!(r.status, RunStatus::Converged);
        let xs = p.kkt_solution().0;
        let err = (DVector::from_vec(r.final_x.clone()) - xs).amax();
        assert!(err <= 1e-5, "error {err}");
        assert!(r.rows.iter().all(|row| row.alpha >= row.beta && row.alpha <= row.beta + row.beta * row.beta));
        assert!(r.rows.windows(2).all(|w| w[1].mu >= w[0].mu));
        assert!(r.rows.iter().all(|row| row.case == 0 && row.norm_b == 1.0));
    }

    #[test]
    fn noisy_run_is_reproducible() {
        let p = QuadraticProblem::fixture_small();
        let cfg = BaselineConfig {
            beta: BetaSchedule::Power(0.6),
            max_iter: 300,
            seed: 9,
            ..Default::default()
        };
        let a = run_baseline(&p, &NoiseModel::gaussian(1e-2), &cfg).unwrap();
        let b = run_baseline(&p, &NoiseModel::gaussian(1e-2), &cfg).unwrap();
        assert_eq!(a.final_x, b.final_x);
        assert_eq!(a.rows.len(), 300);
    }

    fn instance() -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>, DVector<f64>)> {
        (2usize..4, 5usize..9).prop_flat_map(|(m, d)| {
            (
                prop::collection::vec(-1.0f64..1.0, m * d),
                prop::collection::vec(-3.0f64..3.0, m),
                prop::collection::vec(-3.0f64..3.0, d),
            )
                .prop_map(move |(g, c, gb)| {
                    let mut g = DMatrix::from_row_slice(m, d, &g);
                    for i in 0..m {
                        g[(i, i)] += 2.0;
                    }
                    (g, DVector::from_vec(c), DVector::from_vec(gb))
                })
        })
    }

    proptest! {
        #[test]
        fn newton_step_solves_kkt_system((g, c, gbar) in instance()) {
            let fac = factorize(g.clone()).unwrap();
            let dx = newton_kkt_step(&fac, &c, &gbar).unwrap();
            let lambda = fac.ls_multiplier(&(&gbar + &dx));
            let r1 = &dx + &gbar + g.tr_mul(&lambda);
            let r2 = &g * &dx + &c;
            let scale = 1.0 + gbar.norm() + c.norm();
            prop_assert!(r1.norm() <= 1e-10 * scale);
            prop_assert!(r2.norm() <= 1e-10 * scale);
            prop_assert!((fac.project_null(&dx) + fac.project_null(&gbar)).norm() <= 1e-10 * scale);
        }

        #[test]
        fn stepsize_in_interval(beta in 1e-6f64..1.0, ratio in -10.0f64..10.0) {
            let a = projected_stepsize(beta, ratio);
            prop_assert!(a >= beta && a <= beta + beta * beta);
        }
    }
}
