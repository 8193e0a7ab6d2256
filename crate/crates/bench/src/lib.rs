//! Fixtures shared by the benchmarks.

use nalgebra::{DMatrix, DVector};
use trsqp_core::{BetaSchedule, Dataset, HessianKind, NoiseModel, SolverConfig};

/// Deterministic indefinite subproblem of size `d` with radius 1.
pub fn trs_instance(d: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
    let a = DMatrix::from_fn(d, d, |i, j| ((i * 31 + j * 17) as f64).sin());
    let h = (&a + a.transpose()) * 0.5;
    let g = DVector::from_fn(d, |i, _| ((i * 7 + 3) as f64).cos());
    (h, g, 1.0)
}

/// Short noisy run used to time whole iterations.
pub fn short_config(kind: HessianKind, max_iter: usize) -> (NoiseModel, SolverConfig) {
    let config = SolverConfig {
        hessian: kind,
        beta: BetaSchedule::Constant(0.5),
        max_iter,
        kkt_tol: 0.0,
        ..Default::default()
    };
    (NoiseModel::gaussian(1e-2), config)
}

/// Dense `n × d` dataset with about half the entries nonzero.
pub fn dataset(n: usize, d: usize) -> Dataset {
    let features = DMatrix::from_fn(n, d, |i, j| {
        let v = ((i * 13 + j * 29) as f64).sin();
        if v.abs() < 0.5 {
            0.0
        } else {
            v
        }
    });
    let labels = DVector::from_fn(n, |i, _| if i % 3 == 0 { 1.0 } else { -1.0 });
    Dataset::new(features, labels).expect("labels are ±1")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_well_formed() {
        let (h, g, _) = trs_instance(8);
        assert_eq!(h, h.transpose());
        assert_eq!(g.len(), 8);
        let data = dataset(10, 4);
        assert_eq!((data.n_samples(), data.dim()), (10, 4));
    }
}
