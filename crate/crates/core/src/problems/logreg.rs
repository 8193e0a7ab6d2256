//! Logistic regression with random linear equality constraints,
//! `min (1/N) Σ log(1 + exp(−yᵢ⟨zᵢ, x⟩))  s.t. Ax = b`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::factorize;
use crate::libsvm::Dataset;
use crate::oracle::{stream, StreamPurpose};
use crate::problem::{FiniteSum, Problem};

/// Number of constraint draws tried before giving up on full row rank.
pub const MAX_RANK_ATTEMPTS: usize = 10;

#[derive(Debug, Clone)]
pub struct LogRegProblem {
    name: String,
    data: Dataset,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

/// `log(1 + exp(−t))` without overflow.
fn softplus_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `1 / (1 + exp(t))`.
fn sigmoid_neg(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

impl LogRegProblem {
    pub fn new(name: impl Into<String>, data: Dataset, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.ncols() != data.dim() || a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                context: "LogRegProblem::new",
                expected: data.dim(),
                got: a.ncols(),
            });
        }
        factorize(a.clone())?;
        Ok(Self {
            name: name.into(),
            data,
            a,
            b,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn constraint_rhs(&self) -> &DVector<f64> {
        &self.b
    }

    fn margin(&self, x: &DVector<f64>, i: usize) -> f64 {
        self.data.labels[i] * self.data.features.row(i).transpose().dot(x)
    }

    /// Value and gradient of the full average, or of sample `i` alone.
    pub fn value_grad(&self, x: &DVector<f64>, sample: Option<usize>) -> (f64, DVector<f64>) {
        match sample {
            Some(i) => {
                let t = self.margin(x, i);
                let coef = -self.data.labels[i] * sigmoid_neg(t);
                (softplus_neg(t), self.data.features.row(i).transpose() * coef)
            }
            None => {
                let n = self.data.n_samples();
                let mut value = 0.0;
                let mut weights = DVector::zeros(n);
                for i in 0..n {
                    let t = self.margin(x, i);
                    value += softplus_neg(t);
                    weights[i] = -self.data.labels[i] * sigmoid_neg(t);
                }
                let nf = n as f64;
                (value / nf, self.data.features.tr_mul(&weights) / nf)
            }
        }
    }

    fn sample_hessian(&self, x: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let t = self.margin(x, i);
        let s = sigmoid_neg(t);
        let z = self.data.features.row(i).transpose();
        &z * z.transpose() * (s * (1.0 - s))
    }
}

impl Problem for LogRegProblem {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim_x(&self) -> usize {
        self.data.dim()
    }
    fn dim_c(&self) -> usize {
        self.a.nrows()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.value_grad(x, None).0
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.value_grad(x, None).1
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.data.n_samples();
        let d = self.dim_x();
        let mut h = DMatrix::zeros(d, d);
        for i in 0..n {
            h += self.sample_hessian(x, i);
        }
        Some(h / n as f64)
    }
    fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
    fn jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
    fn constraint_hessians(&self, _x: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let d = self.dim_x();
        Some(vec![DMatrix::zeros(d, d); self.dim_c()])
    }
    fn initial_point(&self) -> DVector<f64> {
        DVector::from_element(self.dim_x(), 1.0)
    }
    fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        Some(self)
    }
}

impl FiniteSum for LogRegProblem {
    fn n_components(&self) -> usize {
        self.data.n_samples()
    }
    fn component_gradient(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        self.value_grad(x, Some(i)).1
    }
    fn component_hessian(&self, x: &DVector<f64>, i: usize) -> Option<DMatrix<f64>> {
        Some(self.sample_hessian(x, i))
    }
}

/// Draws `A` (`m × d`) and `b` entrywise from `N(0, 1)` under `seed`, retrying
/// until `A` has full row rank.
pub fn make_logreg_problem(name: &str, data: Dataset, m: usize, seed: u64) -> Result<LogRegProblem> {
    let d = data.dim();
    if m == 0 || m >= d {
        return Err(Error::Config(format!("need 0 < m < d, got m={m}, d={d}")));
    }
    let mut rng = stream(seed, StreamPurpose::Data);
    for attempt in 1..=MAX_RANK_ATTEMPTS {
        let a = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        match LogRegProblem::new(name, data.clone(), a, b) {
            Ok(p) => {
                let c0 = p.constraints(&p.initial_point()).norm();
                log::info!("{name}: constraints drawn on attempt {attempt}, ‖c(x0)‖ = {c0:.6e}");
                return Ok(p);
            }
            Err(Error::RankDeficient { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RankDeficient {
        condition: f64::INFINITY,
    })
}
