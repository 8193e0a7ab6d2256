//! Stochastic gradient and Hessian oracles.
//!
//! Every run owns one independently seeded stream per purpose (see
//! [`RngStreams`]), so enabling Hessian sampling never perturbs the sequence of
//! gradient draws.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::Problem;

/// Probing distance used by [`estimate_lipschitz`] in solver runs.
pub const LIPSCHITZ_PROBE_DELTA: f64 = 0.1;
/// Number of probe directions used in solver runs.
pub const LIPSCHITZ_PROBES: usize = 50;
/// Lower bound applied to both Lipschitz estimates.
pub const LIPSCHITZ_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Exact oracles.
    None,
    /// `ḡ ~ N(∇f, σ²(I + 𝟙𝟙ᵀ))`; Hessian entries perturbed by `N(0, σ²)`.
    GaussianCorr,
    /// Gradient (and Hessian) of one uniformly drawn component function.
    Subsample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Variance level `σ²`; only read for [`NoiseKind::GaussianCorr`].
    pub sigma2: f64,
}

impl NoiseModel {
    pub const fn exact() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma2: 0.0,
        }
    }

    pub const fn gaussian(sigma2: f64) -> Self {
        Self {
            kind: NoiseKind::GaussianCorr,
            sigma2,
        }
    }

    pub const fn subsample() -> Self {
        Self {
            kind: NoiseKind::Subsample,
            sigma2: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == NoiseKind::GaussianCorr && !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be finite and nonnegative, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

/// A single stochastic gradient draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub gbar: DVector<f64>,
    /// Component index in subsample mode.
    pub sample_id: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Gradient = 1,
    Hessian = 2,
    Probing = 3,
    /// Random problem data (e.g. constraint matrices).
    Data = 4,
}

/// Per-run random streams, one per [`StreamPurpose`].
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub gradient: ChaCha8Rng,
    pub hessian: ChaCha8Rng,
    pub probing: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            gradient: stream(seed, StreamPurpose::Gradient),
            hessian: stream(seed, StreamPurpose::Hessian),
            probing: stream(seed, StreamPurpose::Probing),
        }
    }
}

/// Deterministic stream for `(seed, purpose)`.
pub fn stream(seed: u64, purpose: StreamPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

pub fn sample_gradient<R: Rng + ?Sized>(
    model: &NoiseModel,
    problem: &dyn Problem,
    x: &DVector<f64>,
    rng: &mut R,
) -> Result<GradientEstimate> {
    model.validate()?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("sample_gradient: non-finite iterate".into()));
    }
    match model.kind {
        NoiseKind::None => Ok(GradientEstimate {
            gbar: problem.gradient(x),
            sample_id: None,
        }),
        NoiseKind::GaussianCorr => {
            let mut g = problem.gradient(x);
            if model.sigma2 > 0.0 {
                let sigma = model.sigma2.sqrt();
                // σ(ε₀𝟙 + ε) has covariance σ²(𝟙𝟙ᵀ + I)
                let shared: f64 = rng.sample(StandardNormal);
                for gi in g.iter_mut() {
                    let own: f64 = rng.sample(StandardNormal);
                    *gi += sigma * (shared + own);
                }
            }
            Ok(GradientEstimate {
                gbar: g,
                sample_id: None,
            })
        }
        NoiseKind::Subsample => {
            let fs = finite_sum(problem)?;
            let i = rng.random_range(0..fs.n_components());
            Ok(GradientEstimate {
                gbar: fs.component_gradient(x, i),
                sample_id: Some(i),
            })
        }
    }
}

/// Stochastic objective Hessian. In subsample mode `sample_id` must be the index
/// drawn by the paired [`sample_gradient`] call.
pub fn sample_hessian<R: Rng + ?Sized>(
    model: &NoiseModel,
    problem: &dyn Problem,
    x: &DVector<f64>,
    sample_id: Option<usize>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    model.validate()?;
    let missing = || Error::Capability(format!("{} has no Hessian oracle", problem.name()));
    match model.kind {
        NoiseKind::None => problem.hessian(x).ok_or_else(missing),
        NoiseKind::GaussianCorr => {
            let mut h = problem.hessian(x).ok_or_else(missing)?;
            if model.sigma2 > 0.0 {
                let sigma = model.sigma2.sqrt();
                let d = h.nrows();
                for j in 0..d {
                    for i in 0..=j {
                        let e: f64 = rng.sample(StandardNormal);
                        h[(i, j)] += sigma * e;
                        if i != j {
                            h[(j, i)] = h[(i, j)];
                        }
                    }
                }
            }
            Ok(h)
        }
        NoiseKind::Subsample => {
            let fs = finite_sum(problem)?;
            let i = sample_id.ok_or_else(|| {
                Error::Contract("subsample Hessian requires the paired gradient sample id".into())
            })?;
            fs.component_hessian(x, i).ok_or_else(missing)
        }
    }
}

fn finite_sum(problem: &dyn Problem) -> Result<&dyn crate::problem::FiniteSum> {
    problem.finite_sum().ok_or_else(|| {
        Error::Capability(format!(
            "{} is not a finite sum; subsample noise unavailable",
            problem.name()
        ))
    })
}

/// Difference-quotient Lipschitz estimates of `∇f` and `G` around `x0`.
///
/// Returns `(L_grad, L_jac)`, each the maximum over `n_probe` random unit
/// directions `u` of `‖F(x0 + δu) − F(x0)‖ / δ`, floored at [`LIPSCHITZ_FLOOR`].
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    problem: &dyn Problem,
    x0: &DVector<f64>,
    n_probe: usize,
    delta: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_probe < 2 {
        return Err(Error::Config(format!("n_probe must be at least 2, got {n_probe}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!("probe distance must be positive, got {delta}")));
    }
    let g0 = problem.gradient(x0);
    let j0 = problem.jacobian(x0);
    let mut l_grad = 0.0f64;
    let mut l_jac = 0.0f64;
    for _ in 0..n_probe {
        let u = random_unit(x0.len(), rng);
        let xp = x0 + &u * delta;
        l_grad = l_grad.max((problem.gradient(&xp) - &g0).norm() / delta);
        let dj = problem.jacobian(&xp) - &j0;
        l_jac = l_jac.max(spectral_norm(&dj) / delta);
    }
    Ok((l_grad.max(LIPSCHITZ_FLOOR), l_jac.max(LIPSCHITZ_FLOOR)))
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Largest singular value of a dense matrix.
pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::quadratic::QuadraticProblem;

    fn quad() -> QuadraticProblem {
        QuadraticProblem::fixture_small()
    }

    #[test]
    fn exact_noise_returns_truth() {
        let p = quad();
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let mut rng = stream(1, StreamPurpose::Gradient);
        let est = sample_gradient(&NoiseModel::exact(), &p, &x, &mut rng).unwrap();
        assert_eq!(est.gbar, p.gradient(&x));
        let est = sample_gradient(&NoiseModel::gaussian(0.0), &p, &x, &mut rng).unwrap();
        assert_eq!(est.gbar, p.gradient(&x));
        let h = sample_hessian(&NoiseModel::gaussian(0.0), &p, &x, None, &mut rng).unwrap();
        assert_eq!(h, p.hessian(&x).unwrap());
    }

    #[test]
    fn negative_variance_rejected() {
        let p = quad();
        let x = p.initial_point();
        let mut rng = stream(1, StreamPurpose::Gradient);
        let err = sample_gradient(&NoiseModel::gaussian(-1.0), &p, &x, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn subsample_requires_finite_sum() {
        let p = quad();
        let x = p.initial_point();
        let mut rng = stream(1, StreamPurpose::Gradient);
        let err = sample_gradient(&NoiseModel::subsample(), &p, &x, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn sampled_hessian_is_symmetric() {
        let p = quad();
        let x = p.initial_point();
        let mut rng = stream(9, StreamPurpose::Hessian);
        for _ in 0..20 {
            let h = sample_hessian(&NoiseModel::gaussian(0.3), &p, &x, None, &mut rng).unwrap();
            assert_eq!(&h - h.transpose(), DMatrix::zeros(3, 3));
        }
    }

    #[test]
    fn hessian_entry_variance() {
        let p = quad();
        let x = p.initial_point();
        let truth = p.hessian(&x).unwrap();
        let sigma2 = 0.1;
        let n = 100_000usize;
        let mut rng = stream(5, StreamPurpose::Hessian);
        let mut s1 = DMatrix::<f64>::zeros(3, 3);
        let mut s2 = DMatrix::<f64>::zeros(3, 3);
        for _ in 0..n {
            let e = sample_hessian(&NoiseModel::gaussian(sigma2), &p, &x, None, &mut rng).unwrap() - &truth;
            s1 += &e;
            s2 += e.component_mul(&e);
        }
        let nf = n as f64;
        for i in 0..3 {
            for j in 0..3 {
                let mean = s1[(i, j)] / nf;
                let var = s2[(i, j)] / nf - mean * mean;
                // standard error of a normal sample variance: σ²·sqrt(2/(n−1))
                let se = sigma2 * (2.0 / (nf - 1.0)).sqrt();
                assert!((var - sigma2).abs() <= 3.0 * se, "({i},{j}) var {var}");
            }
        }
    }

    #[test]
    fn reproducible_streams() {
        let p = quad();
        let x = p.initial_point();
        let draw = |seed| {
            let mut rng = stream(seed, StreamPurpose::Gradient);
            (0..5)
                .map(|_| sample_gradient(&NoiseModel::gaussian(0.5), &p, &x, &mut rng).unwrap().gbar)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
        // purposes are independent streams of the same seed
        let mut a = stream(42, StreamPurpose::Gradient);
        let mut b = stream(42, StreamPurpose::Hessian);
        assert_ne!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn lipschitz_of_quadratic_within_spectrum() {
        let p = quad();
        let x = p.initial_point();
        let h = p.hessian(&x).unwrap();
        let eig = nalgebra::SymmetricEigen::new(h).eigenvalues;
        let mut rng = stream(3, StreamPurpose::Probing);
        let (lg, lj) = estimate_lipschitz(&p, &x, 200, 0.1, &mut rng).unwrap();
        assert!(lg >= eig.min() - 1e-9 && lg <= eig.max() + 1e-9, "{lg} vs {eig}");
        // linear constraints: zero variation is floored
        assert_eq!(lj, LIPSCHITZ_FLOOR);
        assert!(estimate_lipschitz(&p, &x, 1, 0.1, &mut rng).is_err());
    }
}
