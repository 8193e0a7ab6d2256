//! Hessian approximations `B_k`.
//!
//! A strategy alternates strictly between [`HessianStrategy::produce`] for
//! iteration `k` (before the gradient draw) and [`HessianStrategy::record`]
//! with the information drawn at iteration `k`. `B_k` therefore only depends
//! on iterations `≤ k − 1`. Every kind starts from `B_0 = I`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of sampled Hessians averaged by [`HessianKind::AveH`].
pub const AVEH_WINDOW: usize = 100;
/// SR1 updates with `|rᵀdx| < SR1_SKIP_TOL·‖r‖‖dx‖` are skipped.
pub const SR1_SKIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianKind {
    /// `B_k = I`.
    Id,
    /// Symmetric rank-one updates of stochastic Lagrangian gradient differences.
    Sr1,
    /// Last sampled Lagrangian Hessian.
    EstH,
    /// Mean of the last [`AVEH_WINDOW`] sampled Lagrangian Hessians.
    AveH,
}

impl HessianKind {
    pub const ALL: [HessianKind; 4] = [HessianKind::Id, HessianKind::Sr1, HessianKind::EstH, HessianKind::AveH];

    pub fn as_str(self) -> &'static str {
        match self {
            HessianKind::Id => "id",
            HessianKind::Sr1 => "sr1",
            HessianKind::EstH => "esth",
            HessianKind::AveH => "aveh",
        }
    }

    /// Whether [`HessianStrategy::record`] needs a sampled Lagrangian Hessian.
    pub fn needs_sample(self) -> bool {
        matches!(self, HessianKind::EstH | HessianKind::AveH)
    }
}

impl fmt::Display for HessianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HessianKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        HessianKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown Hessian kind `{s}` (id, sr1, esth, aveh)")))
    }
}

/// `H + rrᵀ/(rᵀdx)` with `r = y − H dx`. Returns the input unchanged and
/// `false` when the denominator is too small or the update is not finite.
pub fn sr1_update(h_prev: &DMatrix<f64>, dx: &DVector<f64>, y: &DVector<f64>) -> (DMatrix<f64>, bool) {
    let r = y - h_prev * dx;
    let denom = r.dot(dx);
    if !(denom.abs() >= SR1_SKIP_TOL * r.norm() * dx.norm()) || r.norm() == 0.0 {
        return (h_prev.clone(), false);
    }
    let mut h = h_prev + &r * r.transpose() / denom;
    if h.iter().any(|v| !v.is_finite()) {
        return (h_prev.clone(), false);
    }
    symmetrize(&mut h);
    (h, true)
}

fn symmetrize(h: &mut DMatrix<f64>) {
    let n = h.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
}

/// Information from iteration `k` used to build later `B`.
#[derive(Debug, Clone, Copy)]
pub struct IterationInfo<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    /// `∇̄ₓL_k = ḡ_k + G_kᵀλ̄_k`.
    pub lagrangian_gradient: &'a DVector<f64>,
    /// `∇̄²f_k + Σ (λ̄_k)ᵢ ∇²cᵢ(x_k)`; required by [`HessianKind::needs_sample`] kinds.
    pub lagrangian_hessian: Option<&'a DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Produce,
    Record,
}

#[derive(Debug, Clone)]
pub struct HessianStrategy {
    kind: HessianKind,
    dim: usize,
    next_k: usize,
    phase: Phase,
    sr1_h: DMatrix<f64>,
    sr1_prev: Option<(DVector<f64>, DVector<f64>)>,
    sr1_skips: usize,
    samples: VecDeque<DMatrix<f64>>,
}

impl HessianStrategy {
    pub fn new(kind: HessianKind, dim: usize) -> Self {
        Self {
            kind,
            dim,
            next_k: 0,
            phase: Phase::Produce,
            sr1_h: DMatrix::identity(dim, dim),
            sr1_prev: None,
            sr1_skips: 0,
            samples: VecDeque::with_capacity(if kind == HessianKind::AveH { AVEH_WINDOW } else { 1 }),
        }
    }

    pub fn kind(&self) -> HessianKind {
        self.kind
    }

    pub fn sr1_skips(&self) -> usize {
        self.sr1_skips
    }

    /// `B_k`. Must be called once per iteration, before that iteration's
    /// gradient draw is recorded.
    pub fn produce(&mut self, k: usize) -> Result<DMatrix<f64>> {
        if self.phase != Phase::Produce || k != self.next_k {
            return Err(Error::Contract(format!(
                "Hessian strategy: produce({k}) out of order (expected produce({}) before its record)",
                self.next_k
            )));
        }
        self.phase = Phase::Record;
        let eye = || DMatrix::identity(self.dim, self.dim);
        if k == 0 {
            return Ok(eye());
        }
        Ok(match self.kind {
            HessianKind::Id => eye(),
            HessianKind::Sr1 => self.sr1_h.clone(),
            HessianKind::EstH => self.samples.back().cloned().unwrap_or_else(eye),
            HessianKind::AveH => {
                if self.samples.is_empty() {
                    eye()
                } else {
                    let mut sum = DMatrix::zeros(self.dim, self.dim);
                    for s in &self.samples {
                        sum += s;
                    }
                    sum / self.samples.len() as f64
                }
            }
        })
    }

    /// Absorbs the information drawn at iteration `info.k`.
    pub fn record(&mut self, info: IterationInfo<'_>) -> Result<()> {
        if self.phase != Phase::Record || info.k != self.next_k {
            return Err(Error::Contract(format!(
                "Hessian strategy: record({}) without a preceding produce({})",
                info.k, info.k
            )));
        }
        match self.kind {
            HessianKind::Id => {}
            HessianKind::Sr1 => {
                if let Some((x_prev, l_prev)) = &self.sr1_prev {
                    let dx = info.x - x_prev;
                    let y = info.lagrangian_gradient - l_prev;
                    let (h, applied) = sr1_update(&self.sr1_h, &dx, &y);
                    if applied {
                        self.sr1_h = h;
                    } else {
                        self.sr1_skips += 1;
                        log::debug!("SR1 update skipped at iteration {}", info.k);
                    }
                }
                self.sr1_prev = Some((info.x.clone(), info.lagrangian_gradient.clone()));
            }
            HessianKind::EstH | HessianKind::AveH => {
                let h = info.lagrangian_hessian.ok_or_else(|| {
                    Error::Capability(format!("{} needs a sampled Lagrangian Hessian", self.kind))
                })?;
                let mut h = h.clone();
                symmetrize(&mut h);
                let cap = if self.kind == HessianKind::AveH { AVEH_WINDOW } else { 1 };
                if self.samples.len() == cap {
                    self.samples.pop_front();
                }
                self.samples.push_back(h);
            }
        }
        self.next_k += 1;
        self.phase = Phase::Produce;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(s: &mut HessianStrategy, k: usize, h: &DMatrix<f64>) {
        let x = DVector::zeros(h.nrows());
        s.record(IterationInfo {
            k,
            x: &x,
            lagrangian_gradient: &x,
            lagrangian_hessian: Some(h),
        })
        .unwrap();
    }

    #[test]
    fn first_iterate_is_identity() {
        for kind in HessianKind::ALL {
            let mut s = HessianStrategy::new(kind, 3);
            assert_eq!(s.produce(0).unwrap(), DMatrix::identity(3, 3));
        }
    }

    #[test]
    fn identity_kind() {
        let mut s = HessianStrategy::new(HessianKind::Id, 2);
        for k in 0..5 {
            assert_eq!(s.produce(k).unwrap(), DMatrix::identity(2, 2));
            feed(&mut s, k, &DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn call_order_enforced() {
        let mut s = HessianStrategy::new(HessianKind::AveH, 2);
        let x = DVector::zeros(2);
        let info = IterationInfo {
            k: 0,
            x: &x,
            lagrangian_gradient: &x,
            lagrangian_hessian: None,
        };
        assert!(matches!(s.record(info), Err(Error::Contract(_))));
        s.produce(0).unwrap();
        assert!(s.produce(0).is_err());
        assert!(matches!(s.record(info), Err(Error::Capability(_))));
    }

    #[test]
    fn aveh_small_window_mean() {
        let mut s = HessianStrategy::new(HessianKind::AveH, 2);
        let a: Vec<DMatrix<f64>> = (0..3)
            .map(|i| DMatrix::from_row_slice(2, 2, &[i as f64, 1.0, 1.0, -(i as f64)]))
            .collect();
        for (k, ak) in a.iter().enumerate() {
            s.produce(k).unwrap();
            feed(&mut s, k, ak);
        }
        let expect = (&a[0] + &a[1] + &a[2]) / 3.0;
        assert_eq!(s.produce(3).unwrap(), expect);
    }

    #[test]
    fn aveh_ring_buffer_matches_brute_force() {
        let mut s = HessianStrategy::new(HessianKind::AveH, 3);
        let mut all = Vec::new();
        for k in 0..257usize {
            let b = s.produce(k).unwrap();
            if k >= AVEH_WINDOW {
                let tail = &all[k - AVEH_WINDOW..k];
                let mean = tail.iter().fold(DMatrix::zeros(3, 3), |acc: DMatrix<f64>, m| acc + m) / AVEH_WINDOW as f64;
                assert!((b - mean).amax() <= 1e-12, "k = {k}");
            }
            let t = k as f64;
            let h = DMatrix::from_fn(3, 3, |i, j| ((i + j) as f64 * 0.7 + t).sin() * 1e3);
            feed(&mut s, k, &h);
            all.push(h);
        }
    }

    #[test]
    fn esth_returns_previous_sample() {
        let mut s = HessianStrategy::new(HessianKind::EstH, 2);
        s.produce(0).unwrap();
        let h = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, -3.0]);
        feed(&mut s, 0, &h);
        assert_eq!(s.produce(1).unwrap(), h);
    }

    #[test]
    fn sr1_examples() {
        let i2 = DMatrix::identity(2, 2);
        let dx = DVector::from_vec(vec![1.0, 0.0]);
        let (h, applied) = sr1_update(&i2, &dx, &dx);
        assert!(!applied);
        assert_eq!(h, i2);
        let (h, applied) = sr1_update(&i2, &dx, &DVector::from_vec(vec![2.0, 0.0]));
        assert!(applied);
        assert_eq!(h, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])));
    }

    #[test]
    fn sr1_secant_and_convergence() {
        let t = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let mut h = DMatrix::identity(3, 3);
        let first = (&h - &t).norm();
        for i in 0..20 {
            let f = i as f64;
            let dx = DVector::from_vec(vec![(1.3 * f).sin(), (0.7 * f + 1.0).cos(), (2.1 * f + 0.3).sin()]);
            let y = &t * &dx;
            let (next, applied) = sr1_update(&h, &dx, &y);
            if applied {
                assert!((&next * &dx - &y).norm() <= 1e-8 * y.norm());
            }
            h = next;
        }
        // secant pairs of a fixed quadratic recover it after d independent updates
        assert!((&h - &t).norm() < 1e-6 * first);
    }

    #[test]
    fn sr1_strategy_uses_previous_differences() {
        let mut s = HessianStrategy::new(HessianKind::Sr1, 2);
        let xs = [DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![1.0, 0.0])];
        let gs = [DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![2.0, 0.0])];
        for k in 0..2 {
            let b = s.produce(k).unwrap();
            assert_eq!(b, DMatrix::identity(2, 2));
            s.record(IterationInfo {
                k,
                x: &xs[k],
                lagrangian_gradient: &gs[k],
                lagrangian_hessian: None,
            })
            .unwrap();
        }
        assert_eq!(s.produce(2).unwrap(), DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])));
    }

    #[test]
    fn kind_round_trip() {
        for k in HessianKind::ALL {
            assert_eq!(k.as_str().parse::<HessianKind>().unwrap(), k);
        }
        assert!("bfgs".parse::<HessianKind>().is_err());
    }
}
