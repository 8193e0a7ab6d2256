//! Radius split, relaxation factor and trial-step assembly.
//!
//! The radius `Δ` is split as `Δ̆ = Δ‖c‖/R`, `Δ̃ = Δ‖∇̄ₓL‖/R` with
//! `R = ‖(∇̄ₓL, c)‖`. The normal step `w = γ̄v` uses `γ̄ = min{Δ̆/‖v‖, 1}` and the
//! tangential step `t = Pu` solves the subproblem with radius `Δ̃`, so that
//! `c + GΔx = (1 − γ̄)c`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::ConstraintFactorization;
use crate::trsub::{solve_tangential, ProjectedHessian, TangentialSolution, TrsMethod, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSplit {
    pub delta: f64,
    pub delta_feas: f64,
    pub delta_opt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDecomposition {
    pub gamma: f64,
    pub normal: DVector<f64>,
    pub tangential: DVector<f64>,
    pub trial: DVector<f64>,
    pub split: RadiusSplit,
    pub subproblem: TangentialSolution,
}

pub fn split_radius(delta: f64, feas_res: f64, opt_res: f64) -> Result<RadiusSplit> {
    let total = feas_res.hypot(opt_res);
    if !(total > 0.0) {
        return Err(Error::Contract("radius split needs a nonzero estimated KKT residual".into()));
    }
    if !(delta >= 0.0) {
        return Err(Error::Contract(format!("radius must be nonnegative, got {delta}")));
    }
    Ok(RadiusSplit {
        delta,
        delta_feas: delta * (feas_res / total),
        delta_opt: delta * (opt_res / total),
    })
}

/// `γ̄ = min{Δ̆/‖v‖, 1}`; `v` must be nonzero.
pub fn relaxation_factor(delta_feas: f64, v: &DVector<f64>) -> f64 {
    let vn = v.norm();
    debug_assert!(vn > 0.0, "relaxation factor of a zero normal direction");
    (delta_feas / vn).min(1.0)
}

/// Builds `Δx = γ̄v + Pu` for the given radius split.
pub fn assemble_step(
    fac: &ConstraintFactorization,
    gbar: &DVector<f64>,
    c: &DVector<f64>,
    b: &DMatrix<f64>,
    split: &RadiusSplit,
    method: TrsMethod,
) -> Result<StepDecomposition> {
    let d = fac.dim_x();
    let v = fac.normal_direction(c);
    let (gamma, normal) = if v.norm() > 0.0 {
        let gamma = relaxation_factor(split.delta_feas, &v);
        (gamma, &v * gamma)
    } else {
        if c.norm() > 0.0 {
            return Err(Error::Contract("zero normal direction with nonzero constraint violation".into()));
        }
        (0.0, DVector::zeros(d))
    };
    let pg = fac.project_null(gbar);
    let op = ProjectedHessian::new(fac, b);
    let subproblem = solve_tangential(&op, &pg, split.delta_opt, method, DEFAULT_TOL)?;
    let mut tangential = subproblem.u.clone();
    // floating-point guard: keep ‖Δx‖ ≤ Δ
    let excess = normal.norm_squared() + tangential.norm_squared() - split.delta * split.delta;
    if excess > 2e-10 * split.delta * split.delta {
        let room = (split.delta * split.delta - normal.norm_squared()).max(0.0).sqrt();
        let tn = tangential.norm();
        if tn > 0.0 {
            tangential *= room / tn;
        }
    }
    let trial = &normal + &tangential;
    Ok(StepDecomposition {
        gamma,
        normal,
        tangential,
        trial,
        split: *split,
        subproblem,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::factorize;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let s = split_radius(10.0, 3.0, 4.0).unwrap();
        assert_eq!((s.delta_feas, s.delta_opt), (6.0, 8.0));
        let s = split_radius(2.0, 0.0, 1.0).unwrap();
        assert_eq!((s.delta_feas, s.delta_opt), (0.0, 2.0));
        let s = split_radius(2.0, 5.0, 0.0).unwrap();
        assert_eq!((s.delta_feas, s.delta_opt), (2.0, 0.0));
        assert!(split_radius(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn relaxation_examples() {
        let v = DVector::from_vec(vec![0.0, 2.0]);
        assert_eq!(relaxation_factor(1.0, &v), 0.5);
        assert_eq!(relaxation_factor(5.0, &v), 1.0);
        assert_eq!(relaxation_factor(0.0, &v), 0.0);
    }

    #[test]
    fn pure_tangential_linear_model() {
        let fac = factorize(DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])).unwrap();
        let g = DVector::from_vec(vec![0.0, 3.0, 4.0]);
        let c = DVector::zeros(1);
        let split = split_radius(2.0, 0.0, 5.0).unwrap();
        let step = assemble_step(&fac, &g, &c, &DMatrix::zeros(3, 3), &split, TrsMethod::Exact).unwrap();
        let expect = &g * (-2.0 / 5.0);
        assert!((step.trial - expect).amax() < 1e-14);
    }

    #[test]
    fn full_feasibility_step() {
        let fac = factorize(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        let g = DVector::from_vec(vec![3.0, 0.0]);
        let c = DVector::from_vec(vec![2.0]);
        let split = split_radius(5.0, 2.0, 0.0).unwrap();
        let step = assemble_step(&fac, &g, &c, &DMatrix::identity(2, 2), &split, TrsMethod::Exact).unwrap();
        assert_eq!(step.gamma, 1.0);
        assert_eq!(step.trial, DVector::from_vec(vec![-2.0, 0.0]));
        assert_eq!((&c + fac.jacobian() * &step.trial).norm(), 0.0);
    }

    #[test]
    fn homogeneous_in_radius() {
        let a = split_radius(1.5, 0.7, 2.3).unwrap();
        let b = split_radius(3.0, 0.7, 2.3).unwrap();
        assert_eq!(b.delta_feas, 2.0 * a.delta_feas);
        assert_eq!(b.delta_opt, 2.0 * a.delta_opt);
    }

    fn instance() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>, f64)> {
        (
            prop::collection::vec(-1.0f64..1.0, 60),
            prop::collection::vec(-2.0f64..2.0, 144),
            prop::collection::vec(-3.0f64..3.0, 12),
            prop::collection::vec(-3.0f64..3.0, 5),
            0.01f64..5.0,
        )
            .prop_map(|(g, b, gb, c, delta)| {
                let mut g = DMatrix::from_row_slice(5, 12, &g);
                for i in 0..5 {
                    g[(i, i)] += 2.0;
                }
                let b = DMatrix::from_row_slice(12, 12, &b);
                let b = (&b + b.transpose()) * 0.5;
                (g, b, DVector::from_vec(gb), DVector::from_vec(c), delta)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn decomposition_invariants((g, b, gbar, c, delta) in instance()) {
            let fac = factorize(g.clone()).unwrap();
            let pg = fac.project_null(&gbar);
            let split = split_radius(delta, c.norm(), pg.norm()).unwrap();
            prop_assert!(((split.delta_feas.powi(2) + split.delta_opt.powi(2)) - delta * delta).abs() <= 1e-12 * delta * delta);
            let step = assemble_step(&fac, &gbar, &c, &b, &split, TrsMethod::Exact).unwrap();
            let tol = 1.0 + 1e-10;
            prop_assert!((0.0..=1.0).contains(&step.gamma));
            prop_assert!(step.trial.norm() <= delta * tol);
            prop_assert!(step.normal.norm() <= split.delta_feas * tol);
            prop_assert!(step.tangential.norm() <= split.delta_opt * tol);
            let lhs = step.trial.norm_squared();
            let rhs = step.normal.norm_squared() + step.tangential.norm_squared();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
            let lin = (&c + &g * &step.trial).norm();
            prop_assert!((lin - (1.0 - step.gamma) * c.norm()).abs() <= 1e-10 * c.norm());
            let nb = crate::trsub::symmetric_norm(&b);
            let bound = -pg.norm() * split.delta_opt + 0.5 * nb * split.delta_opt.powi(2);
            prop_assert!(step.subproblem.model_reduction <= bound + 1e-10 * (1.0 + step.subproblem.model_reduction.abs()));
        }
    }
}
