//! Tangential trust-region subproblem
//!
//! ```text
//! min_u  m(u) = ½ uᵀ H u + gᵀ u    s.t. ‖u‖ ≤ Δ
//! ```
//!
//! where `H = P B P` is symmetric, possibly indefinite and (for projected
//! operators) always singular, and `g = P ḡ`. Three solvers are provided:
//! the Cauchy point, Powell's dogleg (positive-definite operators only) and an
//! exact solver that runs a safeguarded Newton iteration on the secular
//! equation `‖u(ν)‖ = Δ`, `(H + νI) u(ν) = −g`, using Cholesky factorizations.
//! Every returned solution reduces the model at least as much as the Cauchy
//! point.
//!
//! Projected operators are handled without a null-space basis: the exact and
//! dogleg solvers work with `H + κ(I − P)`, which agrees with `H` on `ker(G)`
//! and moves the trivial zero eigenvalues on `im(Gᵀ)` out of the way. Since
//! `g ∈ ker(G)`, the shifted systems keep their solutions in `ker(G)`.

use log::info;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConstraintFactorization;

/// Default relative tolerance on the boundary equation `|‖u‖ − Δ| ≤ tol·Δ`.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Largest dimension for which [`TrsMethod::default_for`] picks the exact solver.
pub const EXACT_MAX_DIM: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrsMethod {
    Cauchy,
    Dogleg,
    Exact,
}

impl TrsMethod {
    pub fn default_for(dim: usize) -> Self {
        if dim <= EXACT_MAX_DIM {
            TrsMethod::Exact
        } else {
            TrsMethod::Cauchy
        }
    }
}

/// Symmetric linear operator `u ↦ H u`.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;

    /// Dense matrix used by the factorization-based solvers. Projected
    /// operators return `H + κ(I − P)` here.
    fn solver_matrix(&self) -> DMatrix<f64>;

    /// Map applied to candidate solutions to remove numerical drift.
    fn clean(&self, v: DVector<f64>) -> DVector<f64> {
        v
    }
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
    fn solver_matrix(&self) -> DMatrix<f64> {
        self.clone()
    }
}

/// `P B P` for a constraint factorization and a symmetric `B`.
#[derive(Debug, Clone)]
pub struct ProjectedHessian {
    p: DMatrix<f64>,
    h: DMatrix<f64>,
    kappa: f64,
}

impl ProjectedHessian {
    pub fn new(fac: &ConstraintFactorization, b: &DMatrix<f64>) -> Self {
        let p = fac.projector();
        let pbp = &p * b * &p;
        let h = (&pbp + pbp.transpose()) * 0.5;
        // κ > every eigenvalue of H so the complement never becomes the
        // most-negative direction.
        let kappa = 1.0 + h.norm();
        Self { p, h, kappa }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.p
    }
}

impl SymmetricOperator for ProjectedHessian {
    fn dim(&self) -> usize {
        self.h.nrows()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.h * v
    }
    fn solver_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        &self.h + (DMatrix::identity(d, d) - &self.p) * self.kappa
    }
    fn clean(&self, v: DVector<f64>) -> DVector<f64> {
        &self.p * v
    }
}

/// A solution of the tangential subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialSolution {
    pub u: DVector<f64>,
    /// `m(u) − m(0) = m(u)`, never positive.
    pub model_reduction: f64,
    pub solver_used: TrsMethod,
    pub boundary_active: bool,
    /// Trust-region multiplier `ν ≥ 0` (zero for interior solutions and for
    /// the Cauchy/dogleg solvers' interior branches).
    pub multiplier: f64,
}

/// `m(u) = ½uᵀHu + gᵀu`.
pub fn model_value(op: &dyn SymmetricOperator, g: &DVector<f64>, u: &DVector<f64>) -> f64 {
    0.5 * u.dot(&op.apply(u)) + g.dot(u)
}

/// Minimizer of the model along `−g` inside the trust region.
pub fn cauchy_point(op: &dyn SymmetricOperator, g: &DVector<f64>, radius: f64) -> TangentialSolution {
    let gn = g.norm();
    if radius <= 0.0 || gn == 0.0 {
        return zero_solution(g.len(), TrsMethod::Cauchy);
    }
    let curv = g.dot(&op.apply(g));
    let (u, boundary) = if gn.powi(3) <= radius * curv {
        (g * (-(gn * gn) / curv), false)
    } else {
        (g * (-radius / gn), true)
    };
    finish(op, g, u, TrsMethod::Cauchy, boundary, 0.0)
}

/// Solves the subproblem with the requested method. The result never has a
/// larger model value than the Cauchy point.
pub fn solve_tangential(
    op: &dyn SymmetricOperator,
    g: &DVector<f64>,
    radius: f64,
    method: TrsMethod,
    tol: f64,
) -> Result<TangentialSolution> {
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Contract(format!("trust-region radius must be finite and ≥ 0, got {radius}")));
    }
    if g.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            context: "solve_tangential",
            expected: op.dim(),
            got: g.len(),
        });
    }
    let cauchy = cauchy_point(op, g, radius);
    if radius == 0.0 || g.norm() == 0.0 && method != TrsMethod::Exact {
        return Ok(cauchy);
    }
    let candidate = match method {
        TrsMethod::Cauchy => return Ok(cauchy),
        TrsMethod::Dogleg => match dogleg(op, g, radius) {
            Some(sol) => sol,
            None => {
                info!("dogleg needs a positive-definite projected Hessian; using the Cauchy point");
                return Ok(cauchy);
            }
        },
        TrsMethod::Exact => exact(op, g, radius, tol),
    };
    if candidate.model_reduction <= cauchy.model_reduction {
        Ok(candidate)
    } else {
        Ok(cauchy)
    }
}

fn zero_solution(d: usize, method: TrsMethod) -> TangentialSolution {
    TangentialSolution {
        u: DVector::zeros(d),
        model_reduction: 0.0,
        solver_used: method,
        boundary_active: false,
        multiplier: 0.0,
    }
}

fn finish(
    op: &dyn SymmetricOperator,
    g: &DVector<f64>,
    u: DVector<f64>,
    method: TrsMethod,
    boundary: bool,
    multiplier: f64,
) -> TangentialSolution {
    let u = op.clean(u);
    TangentialSolution {
        model_reduction: model_value(op, g, &u),
        u,
        solver_used: method,
        boundary_active: boundary,
        multiplier,
    }
}

/// Rescales `u` onto the sphere of radius `radius` if it overshoots.
fn clip(u: DVector<f64>, radius: f64) -> DVector<f64> {
    let n = u.norm();
    if n > radius {
        u * (radius / n)
    } else {
        u
    }
}

fn dogleg(op: &dyn SymmetricOperator, g: &DVector<f64>, radius: f64) -> Option<TangentialSolution> {
    let chol = Cholesky::new(op.solver_matrix())?;
    let full = -chol.solve(g);
    if full.norm() <= radius {
        return Some(finish(op, g, full, TrsMethod::Dogleg, false, 0.0));
    }
    let gg = g.norm_squared();
    let curv = g.dot(&op.apply(g));
    if curv <= 0.0 {
        return None;
    }
    let steepest = g * (-gg / curv);
    let sn = steepest.norm();
    if sn >= radius {
        let u = g * (-radius / gg.sqrt());
        return Some(finish(op, g, u, TrsMethod::Dogleg, true, 0.0));
    }
    // ‖s + τ(f − s)‖ = Δ for τ ∈ [0, 1]
    let dir = &full - &steepest;
    let a = dir.norm_squared();
    let b = 2.0 * steepest.dot(&dir);
    let c = sn * sn - radius * radius;
    let tau = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    let u = clip(steepest + dir * tau.clamp(0.0, 1.0), radius);
    Some(finish(op, g, u, TrsMethod::Dogleg, true, 0.0))
}

struct Shifted {
    chol: Cholesky<f64, Dyn>,
    u: DVector<f64>,
    norm: f64,
}

fn shifted_solve(m: &DMatrix<f64>, g: &DVector<f64>, nu: f64) -> Option<Shifted> {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += nu;
    }
    let chol = Cholesky::new(a)?;
    let u = -chol.solve(g);
    let norm = u.norm();
    if !norm.is_finite() {
        return None;
    }
    Some(Shifted { chol, u, norm })
}

fn is_pd(m: &DMatrix<f64>, shift: f64) -> bool {
    let mut a = m.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += shift;
    }
    Cholesky::new(a).is_some()
}

/// Bracket `[lo, hi]` around `s* = −λ_min(M)` where `M + hi·I` factors and
/// `M + lo·I` does not. Requires `M` itself not positive definite.
fn min_shift_bracket(m: &DMatrix<f64>, scale: f64) -> (f64, f64) {
    let n = m.nrows();
    let mut gersh_lo = f64::INFINITY;
    let mut diag_min = f64::INFINITY;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        gersh_lo = gersh_lo.min(m[(i, i)] - off);
        diag_min = diag_min.min(m[(i, i)]);
    }
    let mut lo = (-diag_min).max(0.0);
    let mut hi = (-gersh_lo).max(lo) + 1e-14 * scale;
    while !is_pd(m, hi) {
        hi = hi.max(1e-300) * 2.0 + 1e-14 * scale;
    }
    let width = 1e-14 * scale;
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if is_pd(m, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

fn exact(op: &dyn SymmetricOperator, g: &DVector<f64>, radius: f64, tol: f64) -> TangentialSolution {
    let n = g.len();
    let m = op.solver_matrix();
    let scale = m
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(1.0, f64::max);
    let gn = g.norm();

    // Interior solution when M is positive definite.
    let lower = match shifted_solve(&m, g, 0.0) {
        Some(s) if s.norm <= radius => {
            return finish(op, g, s.u, TrsMethod::Exact, false, 0.0);
        }
        Some(s) => s,
        None => {
            let (lo, hi) = min_shift_bracket(&m, scale);
            let mut nu = hi;
            let s = loop {
                if let Some(s) = shifted_solve(&m, g, nu) {
                    break s;
                }
                nu = nu * 2.0 + 1e-14 * scale;
            };
            if s.norm < radius {
                if lo <= 1e-12 * scale {
                    // Positive semidefinite and g orthogonal to the null space:
                    // the minimum-norm minimizer is interior.
                    return finish(op, g, s.u, TrsMethod::Exact, false, 0.0);
                }
                return hard_case(op, g, radius, &s, nu, n);
            }
            return secular_newton(op, &m, g, radius, tol, nu, s, gn);
        }
    };
    secular_newton(op, &m, g, radius, tol, 0.0, lower, gn)
}

/// Hard case: `g` has no component along the most-negative eigenspace and the
/// shifted solution is too short; move along an eigenvector to the boundary.
fn hard_case(
    op: &dyn SymmetricOperator,
    g: &DVector<f64>,
    radius: f64,
    shifted: &Shifted,
    nu: f64,
    n: usize,
) -> TangentialSolution {
    // Inverse iteration with the nearly singular shifted factor.
    let mut z = DVector::from_fn(n, |i, _| 1.0 + 0.37 * ((i as f64 + 1.0) * 1.618).sin());
    z /= z.norm();
    for _ in 0..6 {
        let w = shifted.chol.solve(&z);
        let wn = w.norm();
        if !wn.is_finite() || wn == 0.0 {
            break;
        }
        z = w / wn;
    }
    let z = op.clean(z);
    let zn = z.norm();
    let z = if zn > 0.0 { z / zn } else { z };
    let u0 = &shifted.u;
    // ‖u0 + τz‖ = Δ has one root of each sign; take the lower model value.
    let b = u0.dot(&z);
    let c = u0.norm_squared() - radius * radius;
    let disc = (b * b - c).max(0.0).sqrt();
    let cands = [-b + disc, -b - disc];
    let best = cands
        .iter()
        .map(|&t| clip(u0 + &z * t, radius))
        .min_by(|a, b| model_value(op, g, a).total_cmp(&model_value(op, g, b)))
        .expect("two candidates");
    finish(op, g, best, TrsMethod::Exact, true, nu)
}

/// Safeguarded Newton iteration on `1/Δ − 1/‖u(ν)‖ = 0` started from a shift
/// `lo` with `‖u(lo)‖ > Δ`.
#[allow(clippy::too_many_arguments)]
fn secular_newton(
    op: &dyn SymmetricOperator,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
    radius: f64,
    tol: f64,
    lo: f64,
    at_lo: Shifted,
    gn: f64,
) -> TangentialSolution {
    let mut lo = lo;
    // ‖u(ν)‖ ≤ ‖g‖/(λ_min + ν) ≤ Δ once ν ≥ ‖g‖/Δ + lo.
    let mut hi = lo + gn / radius;
    let mut nu = lo;
    let mut cur = at_lo;
    for _ in 0..300 {
        let err = cur.norm - radius;
        // iterate well past `tol`; Newton converges quadratically here
        if err.abs() <= 1e-14 * radius {
            break;
        }
        if err > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        // Newton step with q = L⁻¹u, ‖u‖' = −‖q‖²/‖u‖.
        let q = cur
            .chol
            .l_dirty()
            .view_range(.., ..)
            .solve_lower_triangular(&cur.u)
            .unwrap_or_else(|| cur.u.clone());
        let qn2 = q.norm_squared();
        let mut next = if qn2 > 0.0 {
            nu + (cur.norm * cur.norm / qn2) * (err / radius)
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == nu {
            break;
        }
        match shifted_solve(m, g, next) {
            Some(s) => {
                nu = next;
                cur = s;
            }
            None => {
                lo = next;
            }
        }
    }
    if (cur.norm - radius).abs() <= tol * radius {
        let u = clip(cur.u, radius);
        return finish(op, g, u, TrsMethod::Exact, true, nu);
    }
    // ‖u(ν)‖ jumps across Δ between adjacent representable shifts (nearly hard
    // case): complete the short side along the bottom eigenvector.
    let (nu, short) = if cur.norm < radius {
        (nu, cur)
    } else {
        match shifted_solve(m, g, hi) {
            Some(s) if s.norm <= radius => (hi, s),
            _ => return finish(op, g, clip(cur.u, radius), TrsMethod::Exact, true, nu),
        }
    };
    hard_case(op, g, radius, &short, nu, g.len())
}

/// Operator 2-norm of a symmetric matrix, `max |λᵢ|`.
pub fn symmetric_norm(b: &DMatrix<f64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    nalgebra::SymmetricEigen::new(b.clone())
        .eigenvalues
        .amax()
}
