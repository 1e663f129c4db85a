//! Geometry of `M = {Q_1 = … = Q_k = 0} ∩ B̄ⁿ`.
//!
//! Only constraints with role `eq` define `M` here; `ge`/`gt` constraints and
//! the ball act as feasibility filters when sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::rng;
use crate::{Point, Quadric, SceneSystem};

/// Gram matrices with condition number at or above this are treated as singular.
pub const MAX_GRAM_COND: f64 = 1e12;
/// Default tolerance on `max_i |Q_i(x)|` for points considered on `M`.
pub const ON_MANIFOLD_TOL: f64 = 1e-12;
/// Default iteration cap for [`retract`].
pub const RETRACT_MAX_ITER: usize = 50;
/// Default regularity threshold on `σ_min`.
pub const REGULARITY_THRESHOLD: f64 = 1e-6;

/// Everything the projected gradient needs at one point.
#[derive(Debug, Clone)]
pub struct TangentData {
    pub x: Point,
    pub grad_q: Vec<Point>,
    pub gram: DMatrix<f64>,
    pub u: DVector<f64>,
    pub grad_p: Point,
    pub grad_mp: Point,
    pub sigma_min: f64,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl TangentData {
    /// Orthogonal projection onto the tangent space: `v − Jᵀ G⁻¹ J v`.
    pub fn project(&self, v: &Point) -> Point {
        let Some(chol) = &self.chol else {
            return v.clone();
        };
        let jv = DVector::from_iterator(self.grad_q.len(), self.grad_q.iter().map(|g| g.dot(v)));
        let w = chol.solve(&jv);
        let mut out = v.clone();
        for (g, wi) in self.grad_q.iter().zip(w.iter()) {
            out.axpy(-wi, g, 1.0);
        }
        out
    }

    /// `B v` with `B = He(P) − Σ u_i He(Q_i)`.
    pub fn reduced_hess_mul(&self, scene: &SceneSystem, p: &Quadric, v: &Point) -> Point {
        let mut out = p.hess_mul(v);
        for (q, ui) in scene.equations().zip(self.u.iter()) {
            if *ui != 0.0 {
                out.axpy(-ui, &q.hess_mul(v), 1.0);
            }
        }
        out
    }

    pub fn codim(&self) -> usize {
        self.grad_q.len()
    }
}

/// Gradients `∇Q_i(x)` of the equations.
pub fn constraint_gradients(scene: &SceneSystem, x: &Point) -> Vec<Point> {
    scene.equations().map(|q| q.gradient(x)).collect()
}

/// The `k×n` Jacobian of `(Q_1, …, Q_k)`.
pub fn jacobian(scene: &SceneSystem, x: &Point) -> DMatrix<f64> {
    linalg::rows_to_matrix(&constraint_gradients(scene, x))
}

fn gram_of(grads: &[Point]) -> DMatrix<f64> {
    let k = grads.len();
    let mut g = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let v = grads[i].dot(&grads[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// `G_ij = ⟨∇Q_i(x), ∇Q_j(x)⟩`.
pub fn gram(scene: &SceneSystem, x: &Point) -> Result<DMatrix<f64>> {
    check_dim(scene.dim(), x.len())?;
    Ok(gram_of(&constraint_gradients(scene, x)))
}

/// Smallest singular value of the Jacobian and condition number of `G`.
fn gram_spectrum(g: &DMatrix<f64>) -> (f64, f64) {
    if g.nrows() == 0 {
        return (f64::INFINITY, 1.0);
    }
    let (vals, _) = linalg::sym_eigen(g);
    let lo = vals[0].max(0.0);
    let hi = vals[vals.len() - 1];
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    (lo.sqrt(), cond)
}

/// Projected gradient data for an explicit `P`.
pub fn tangent_data(scene: &SceneSystem, p: &Quadric, x: &Point) -> Result<TangentData> {
    check_dim(scene.dim(), x.len())?;
    check_dim(scene.dim(), p.dim())?;
    let grad_q = constraint_gradients(scene, x);
    let gram = gram_of(&grad_q);
    let grad_p = p.gradient(x);
    let k = grad_q.len();
    if k == 0 {
        return Ok(TangentData {
            x: x.clone(),
            grad_q,
            gram,
            u: DVector::zeros(0),
            grad_mp: grad_p.clone(),
            grad_p,
            sigma_min: f64::INFINITY,
            chol: None,
        });
    }
    let (sigma_min, cond) = gram_spectrum(&gram);
    if !(cond < MAX_GRAM_COND) {
        return Err(Error::RankDeficient { cond });
    }
    let chol = Cholesky::new(gram.clone()).ok_or(Error::RankDeficient { cond })?;
    let rhs = DVector::from_iterator(k, grad_q.iter().map(|g| g.dot(&grad_p)));
    let mut u = chol.solve(&rhs);
    // One step of iterative refinement.
    let r = &rhs - &gram * &u;
    u += chol.solve(&r);
    let mut grad_mp = grad_p.clone();
    for (g, ui) in grad_q.iter().zip(u.iter()) {
        grad_mp.axpy(-ui, g, 1.0);
    }
    Ok(TangentData {
        x: x.clone(),
        grad_q,
        gram,
        u,
        grad_p,
        grad_mp,
        sigma_min,
        chol: Some(chol),
    })
}

/// Multipliers `u(x)` solving `G u = (⟨∇Q_i, ∇P⟩)_i`.
pub fn multipliers(scene: &SceneSystem, x: &Point) -> Result<DVector<f64>> {
    Ok(projected_gradient(scene, x)?.u)
}

/// `∇_M P(x) = ∇P(x) − Σ u_i ∇Q_i(x)` with the scene's Morse quadric.
pub fn projected_gradient(scene: &SceneSystem, x: &Point) -> Result<TangentData> {
    tangent_data(scene, scene.require_morse()?, x)
}

/// `∇(‖∇_M P‖²)(x) = 2 (He(P) − Σ u_i He(Q_i)) ∇_M P(x)` for an explicit `P`.
pub fn grad_normsq_gradient_for(scene: &SceneSystem, p: &Quadric, x: &Point) -> Result<Point> {
    let td = tangent_data(scene, p, x)?;
    Ok(td.reduced_hess_mul(scene, p, &td.grad_mp) * 2.0)
}

/// `∇(‖∇_M P‖²)(x)` with the scene's Morse quadric.
pub fn grad_normsq_gradient(scene: &SceneSystem, x: &Point) -> Result<Point> {
    grad_normsq_gradient_for(scene, scene.require_morse()?, x)
}

fn residual_vector(scene: &SceneSystem, x: &Point) -> DVector<f64> {
    DVector::from_iterator(scene.codim(), scene.equations().map(|q| q.value(x)))
}

/// Gauss–Newton projection onto `{Q_i = 0}`: `x ← x − Jᵀ(JJᵀ)⁻¹Q(x)` until
/// `max_i |Q_i| ≤ tol`.
pub fn retract(scene: &SceneSystem, x0: &Point, tol: f64, max_iter: usize) -> Result<Point> {
    check_dim(scene.dim(), x0.len())?;
    let mut x = x0.clone();
    let mut r = residual_vector(scene, &x);
    for it in 0..=max_iter {
        let res = r.amax();
        if res <= tol {
            return Ok(x);
        }
        if it == max_iter || !res.is_finite() {
            return Err(Error::RetractionDiverged {
                iterations: it,
                residual: res,
            });
        }
        let grads = constraint_gradients(scene, &x);
        let g = gram_of(&grads);
        let (_, cond) = gram_spectrum(&g);
        if !(cond < MAX_GRAM_COND) {
            return Err(Error::RankDeficient { cond });
        }
        let w = Cholesky::new(g).ok_or(Error::RankDeficient { cond })?.solve(&r);
        for (gi, wi) in grads.iter().zip(w.iter()) {
            x.axpy(-wi, gi, 1.0);
        }
        r = residual_vector(scene, &x);
    }
    unreachable!()
}

/// Gauss–Newton with a pseudo-inverse step, run until the step stagnates.
/// Unlike [`retract`] it tolerates rank-deficient Jacobians, so it can land
/// on singular points; returns the point and its final residual.
pub fn retract_lenient(scene: &SceneSystem, x0: &Point, max_iter: usize) -> (Point, f64) {
    let mut x = x0.clone();
    let mut r = residual_vector(scene, &x);
    for _ in 0..max_iter {
        if r.amax() == 0.0 || !r.amax().is_finite() {
            break;
        }
        let j = jacobian(scene, &x);
        let step = linalg::pinv_solve(&j, &r, 1e-13);
        let scale = 1.0 + x.norm();
        x -= &step;
        r = residual_vector(scene, &x);
        if step.norm() <= 1e-15 * scale {
            break;
        }
    }
    let res = r.amax();
    (x, res)
}

const SAMPLE_BATCH: usize = 256;
const STARVED_RATE: f64 = 1e-4;
const MIN_ATTEMPTS: usize = 10_000;

/// Uniform ball draws followed by retraction; keeps points that converge,
/// lie in the ball and satisfy every inequality. Deterministic per seed.
pub fn sample_points(scene: &SceneSystem, count: usize, seed: u64) -> Result<Vec<Point>> {
    sample_with(scene, count, seed, "manifold.sample", |x| {
        let y = retract(scene, x, ON_MANIFOLD_TOL, RETRACT_MAX_ITER).ok()?;
        scene.inequalities_hold(&y, 1e-12).then_some(y)
    })
}

/// Shared batch sampler; `land` maps an ambient draw to an accepted point.
pub(crate) fn sample_with<F>(scene: &SceneSystem, count: usize, seed: u64, stream: &str, land: F) -> Result<Vec<Point>>
where
    F: Fn(&Point) -> Option<Point> + Sync,
{
    let n = scene.dim();
    let r = scene.ball_radius();
    let max_attempts = MIN_ATTEMPTS.max(count.saturating_mul(200));
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        if attempts >= MIN_ATTEMPTS && (out.len() as f64) < STARVED_RATE * attempts as f64 || attempts >= max_attempts {
            return Err(Error::SamplingStarved {
                accepted: out.len(),
                attempts,
            });
        }
        let batch: Vec<Option<Point>> = (attempts..attempts + SAMPLE_BATCH)
            .into_par_iter()
            .map(|i| {
                let mut g = rng::substream(seed, stream, i as u64);
                let x = rng::uniform_in_ball(&mut g, n, r);
                land(&x)
            })
            .collect();
        for p in batch.into_iter().flatten() {
            if out.len() < count {
                out.push(p);
            }
        }
        attempts += SAMPLE_BATCH;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub min_sigma_over_samples: f64,
    pub worst_point: Option<Point>,
    pub sample_count: usize,
    pub verdict: bool,
    pub threshold: f64,
    /// For `k ≥ 2`: the pair of equations closest to dependent at the worst
    /// point (0-based constraint indices).
    pub worst_pair: Option<(usize, usize)>,
}

/// Samples `M` and reports the smallest Jacobian singular value seen.
pub fn regularity_check(scene: &SceneSystem, sample_count: usize, seed: u64) -> RegularityReport {
    regularity_check_with(scene, sample_count, seed, REGULARITY_THRESHOLD)
}

pub fn regularity_check_with(scene: &SceneSystem, sample_count: usize, seed: u64, threshold: f64) -> RegularityReport {
    let scale = scene.equations().map(|q| q.hessian_max_abs().max(q.linear().amax())).fold(1.0, f64::max);
    let land = |x: &Point| {
        let (y, res) = retract_lenient(scene, x, 200);
        (res <= 1e-10 * scale && scene.inequalities_hold(&y, 1e-9)).then_some(y)
    };
    let points = match sample_with(scene, sample_count, seed, "manifold.regularity", land) {
        Ok(p) => p,
        Err(_) => {
            // Starved: keep whatever a fixed budget of draws yields.
            let n = scene.dim();
            (0..MIN_ATTEMPTS)
                .into_par_iter()
                .filter_map(|i| {
                    let mut g = rng::substream(seed, "manifold.regularity", i as u64);
                    land(&rng::uniform_in_ball(&mut g, n, scene.ball_radius()))
                })
                .collect::<Vec<_>>()
                .into_iter()
                .take(sample_count)
                .collect()
        }
    };
    let sigmas: Vec<f64> = points
        .par_iter()
        .map(|x| linalg::sigma_min_of_rows(&constraint_gradients(scene, x)))
        .collect();
    let mut min_sigma = f64::INFINITY;
    let mut worst = None;
    for (x, s) in points.iter().zip(&sigmas) {
        if *s < min_sigma || worst.is_none() {
            min_sigma = min_sigma.min(*s);
            worst = Some(x.clone());
        }
    }
    let worst_pair = worst.as_ref().and_then(|x| worst_pair_at(scene, x));
    RegularityReport {
        min_sigma_over_samples: min_sigma,
        worst_point: worst,
        sample_count: points.len(),
        verdict: min_sigma > threshold,
        threshold,
        worst_pair,
    }
}

fn worst_pair_at(scene: &SceneSystem, x: &Point) -> Option<(usize, usize)> {
    let grads = constraint_gradients(scene, x);
    let k = grads.len();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..k {
        for j in i + 1..k {
            let s = linalg::sigma_min_of_rows(&[grads[i].clone(), grads[j].clone()]);
            if best.is_none_or(|b| s < b.0) {
                best = Some((s, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (scene.equation_index(i), scene.equation_index(j)))
}
