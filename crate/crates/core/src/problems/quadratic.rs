//! Convex quadratic programs `min ½xᵀQx − bᵀx  s.t. Ax = a` with a closed-form
//! KKT solution.

use nalgebra::{DMatrix, DVector};

use crate::problem::Problem;

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    name: String,
    q: DMatrix<f64>,
    b: DVector<f64>,
    a_mat: DMatrix<f64>,
    a_vec: DVector<f64>,
    x0: DVector<f64>,
}

impl QuadraticProblem {
    /// Builds the problem; `q` is symmetrized.
    pub fn new(
        name: impl Into<String>,
        q: DMatrix<f64>,
        b: DVector<f64>,
        a_mat: DMatrix<f64>,
        a_vec: DVector<f64>,
        x0: DVector<f64>,
    ) -> Self {
        let q = (&q + q.transpose()) * 0.5;
        Self {
            name: name.into(),
            q,
            b,
            a_mat,
            a_vec,
            x0,
        }
    }

    /// `QUAD3`: d = 3, one linear constraint.
    pub fn fixture_small() -> Self {
        Self::new(
            "QUAD3",
            DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]),
            DVector::from_vec(vec![1.0, -2.0, 0.5]),
            DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![2.0, -1.0, 0.5]),
        )
    }

    /// `QUAD6`: d = 6, two linear constraints.
    pub fn fixture_medium() -> Self {
        let diag = [4.0, 5.0, 3.0, 6.0, 4.0, 5.0];
        let q = DMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                diag[i]
            } else if i.abs_diff(j) == 1 {
                1.0
            } else {
                0.0
            }
        });
        Self::new(
            "QUAD6",
            q,
            DVector::from_vec(vec![1.0, 0.0, -1.0, 2.0, 0.5, -0.5]),
            DMatrix::from_row_slice(
                2,
                6,
                &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 1.0, 0.0, 2.0],
            ),
            DVector::from_vec(vec![1.0, -1.0]),
            DVector::zeros(6),
        )
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    /// Solves the saddle-point system `[Q Aᵀ; A 0] (x, λ) = (b, a)`.
    pub fn kkt_solution(&self) -> (DVector<f64>, DVector<f64>) {
        let (m, d) = self.a_mat.shape();
        let mut k = DMatrix::zeros(d + m, d + m);
        k.view_mut((0, 0), (d, d)).copy_from(&self.q);
        k.view_mut((0, d), (d, m)).copy_from(&self.a_mat.transpose());
        k.view_mut((d, 0), (m, d)).copy_from(&self.a_mat);
        let mut rhs = DVector::zeros(d + m);
        rhs.rows_mut(0, d).copy_from(&self.b);
        rhs.rows_mut(d, m).copy_from(&self.a_vec);
        let sol = k.lu().solve(&rhs).expect("nonsingular saddle system");
        (sol.rows(0, d).into_owned(), sol.rows(d, m).into_owned())
    }
}

impl Problem for QuadraticProblem {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim_x(&self) -> usize {
        self.q.nrows()
    }
    fn dim_c(&self) -> usize {
        self.a_mat.nrows()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.b.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x - &self.b
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.q.clone())
    }
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a_mat * x - &self.a_vec
    }
    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a_mat.clone()
    }
    fn constraint_hessians(&self, _x: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let d = self.dim_x();
        Some(vec![DMatrix::zeros(d, d); self.dim_c()])
    }
    fn initial_point(&self) -> DVector<f64> {
        self.x0.clone()
    }
}
