//! Equality-constrained problem abstraction and exact (noiseless) evaluation.
//!
//! A [`Problem`] bundles `min f(x) s.t. c(x) = 0` with `x ∈ R^d`, `c: R^d → R^m`,
//! `m < d`. The Lagrangian convention used everywhere is
//! `∇ₓL(x, λ) = ∇f(x) + G(x)ᵀλ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// A deterministic equality-constrained problem with analytic derivatives.
///
/// Implementations are immutable and shared read-only across concurrent runs.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;
    fn dim_x(&self) -> usize;
    fn dim_c(&self) -> usize;

    fn objective(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Whether [`Problem::hessian`] and [`Problem::constraint_hessians`] are available.
    fn has_hessian(&self) -> bool {
        false
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    fn constraints(&self, x: &DVector<f64>) -> DVector<f64>;

    /// `m × d` Jacobian `G(x)` of the constraints.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Hessians `∇²cᵢ(x)`, one per constraint.
    fn constraint_hessians(&self, _x: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        None
    }

    /// Standard starting point for the problem.
    fn initial_point(&self) -> DVector<f64>;

    /// Finite-sum structure `f = (1/N) Σ fᵢ`, for single-sample oracles.
    fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        None
    }
}

/// Objective written as an average of `N` component functions.
pub trait FiniteSum: Send + Sync {
    fn n_components(&self) -> usize;
    fn component_gradient(&self, x: &DVector<f64>, i: usize) -> DVector<f64>;
    fn component_hessian(&self, x: &DVector<f64>, i: usize) -> Option<DMatrix<f64>>;
}

/// Optimality, feasibility and total KKT residual at a point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KktResidual {
    /// `‖g + Gᵀλ‖`
    pub optimality: f64,
    /// `‖c‖`
    pub feasibility: f64,
    /// `‖(g + Gᵀλ, c)‖`
    pub total: f64,
}

impl KktResidual {
    pub fn from_parts(optimality: f64, feasibility: f64) -> Self {
        Self {
            optimality,
            feasibility,
            total: optimality.hypot(feasibility),
        }
    }
}

/// Evaluates the KKT residual at `x` for the given gradient (true or estimated)
/// and multiplier.
pub fn eval_kkt(
    problem: &dyn Problem,
    x: &DVector<f64>,
    grad: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<KktResidual> {
    let (d, m) = (problem.dim_x(), problem.dim_c());
    check_len("eval_kkt: x", d, x.len())?;
    check_len("eval_kkt: grad", d, grad.len())?;
    check_len("eval_kkt: lambda", m, lambda.len())?;
    let g = problem.jacobian(x);
    let c = problem.constraints(x);
    let lag = grad + g.tr_mul(lambda);
    Ok(KktResidual::from_parts(lag.norm(), c.norm()))
}

/// Default central-difference step `1e-5·max(1, ‖x‖∞)`.
pub fn fd_step(x: &DVector<f64>) -> f64 {
    1e-5 * x.amax().max(1.0)
}

/// Central-difference gradient of the objective.
pub fn finite_diff_grad(problem: &dyn Problem, x: &DVector<f64>, h: f64) -> DVector<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut xp = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = problem.objective(&xp);
        xp[i] = xi - h;
        let fm = problem.objective(&xp);
        xp[i] = xi;
        (fp - fm) / (2.0 * h)
    })
}

/// Central-difference Jacobian of the constraints (`m × d`).
pub fn finite_diff_jacobian(problem: &dyn Problem, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let (d, m) = (x.len(), problem.dim_c());
    let mut jac = DMatrix::zeros(m, d);
    let mut xp = x.clone();
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let cp = problem.constraints(&xp);
        xp[j] = xj - h;
        let cm = problem.constraints(&xp);
        xp[j] = xj;
        jac.set_column(j, &((cp - cm) / (2.0 * h)));
    }
    jac
}

/// Central differences of an arbitrary vector field, column `j` = ∂F/∂xⱼ.
pub fn finite_diff_vector_field<F>(field: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let d = x.len();
    let n = field(x).len();
    let mut out = DMatrix::zeros(n, d);
    let mut xp = x.clone();
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let fp = field(&xp);
        xp[j] = xj - h;
        let fm = field(&xp);
        xp[j] = xj;
        out.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    out
}

/// `∇²f + Σ λᵢ ∇²cᵢ` given an objective Hessian (exact or sampled).
pub fn lagrangian_hessian(
    problem: &dyn Problem,
    x: &DVector<f64>,
    objective_hessian: DMatrix<f64>,
    lambda: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let hc = problem
        .constraint_hessians(x)
        .ok_or_else(|| Error::Capability(format!("{} has no constraint Hessians", problem.name())))?;
    check_len("lagrangian_hessian: lambda", hc.len(), lambda.len())?;
    let mut h = objective_hessian;
    for (hi, li) in hc.iter().zip(lambda.iter()) {
        h += hi * *li;
    }
    Ok(h)
}

/// Checks `m < d` and the dimensions reported by the oracles at `x0`.
pub fn validate(problem: &dyn Problem) -> Result<()> {
    let (d, m) = (problem.dim_x(), problem.dim_c());
    if m == 0 || m >= d {
        return Err(Error::Contract(format!(
            "{}: need 0 < m < d, got m={m}, d={d}",
            problem.name()
        )));
    }
    let x0 = problem.initial_point();
    check_len("initial point", d, x0.len())?;
    check_len("constraints", m, problem.constraints(&x0).len())?;
    let g = problem.jacobian(&x0);
    if g.shape() != (m, d) {
        return Err(Error::Contract(format!(
            "{}: Jacobian shape {:?}, expected ({m}, {d})",
            problem.name(),
            g.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f = ½‖x‖², c = x₀ (or a constant objective when `flat`).
    struct Toy {
        flat: bool,
    }

    impl Problem for Toy {
        fn name(&self) -> &str {
            "toy"
        }
        fn dim_x(&self) -> usize {
            2
        }
        fn dim_c(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            if self.flat {
                3.0
            } else {
                0.5 * x.norm_squared()
            }
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            if self.flat {
                DVector::zeros(2)
            } else {
                x.clone()
            }
        }
        fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, x[0])
        }
        fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
        }
        fn initial_point(&self) -> DVector<f64> {
            DVector::from_vec(vec![1.0, 2.0])
        }
    }

    #[test]
    fn kkt_stationary_feasible_point() {
        let p = Toy { flat: false };
        let x = DVector::from_vec(vec![0.0, 5.0]);
        let r = eval_kkt(&p, &x, &DVector::zeros(2), &DVector::zeros(1)).unwrap();
        assert_eq!((r.optimality, r.feasibility, r.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn kkt_direct_arithmetic() {
        let p = Toy { flat: false };
        let x = DVector::from_vec(vec![0.0, 1.0]);
        let grad = DVector::from_vec(vec![3.0, 4.0]);
        let lambda = DVector::from_element(1, -3.0);
        let r = eval_kkt(&p, &x, &grad, &lambda).unwrap();
        assert_eq!(r.optimality, 4.0);
        assert_eq!(r.feasibility, 0.0);
        assert_eq!(r.total, 4.0);
    }

    #[test]
    fn kkt_dimension_mismatch() {
        let p = Toy { flat: false };
        let x = DVector::zeros(2);
        let err = eval_kkt(&p, &x, &DVector::zeros(3), &DVector::zeros(1)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn total_is_hypot_of_parts() {
        let r = KktResidual::from_parts(0.3, 1.7);
        assert!((r.total.powi(2) - (0.09 + 2.89)).abs() <= 1e-12 * r.total.powi(2));
    }

    #[test]
    fn fd_gradient_quadratic() {
        let p = Toy { flat: false };
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let g = finite_diff_grad(&p, &x, 1e-5);
        assert!((g - DVector::from_vec(vec![1.0, 2.0])).amax() <= 1e-8);
    }

    #[test]
    fn fd_gradient_constant() {
        let p = Toy { flat: true };
        let g = finite_diff_grad(&p, &DVector::from_vec(vec![0.3, -7.0]), 1e-5);
        assert_eq!(g, DVector::zeros(2));
    }

    #[test]
    fn validate_rejects_square_system() {
        struct Square;
        impl Problem for Square {
            fn name(&self) -> &str {
                "square"
            }
            fn dim_x(&self) -> usize {
                1
            }
            fn dim_c(&self) -> usize {
                1
            }
            fn objective(&self, _x: &DVector<f64>) -> f64 {
                0.0
            }
            fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
                DVector::zeros(1)
            }
            fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
                x.clone()
            }
            fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::identity(1, 1)
            }
            fn initial_point(&self) -> DVector<f64> {
                DVector::zeros(1)
            }
        }
        assert!(matches!(validate(&Square), Err(Error::Contract(_))));
        assert!(validate(&Toy { flat: false }).is_ok());
    }
}
