//! Multistart Newton on the square system for `h ∩ θ_M(P)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::manifold;
use crate::{Hyperplane, Point, SceneSystem};

use super::bounds::bound_p;
use super::corank::CORANK_TOL;
use super::pattern::{detect_pattern, reduced_residual, PivotPattern};
use super::system::{full_jacobian, full_residual, s_of_u, ParameterPoint};

pub const ACCEPT_RESIDUAL: f64 = 1e-8;
pub const DEDUP_RADIUS: f64 = 1e-5;
const NEWTON_MAX_ITER: usize = 60;
const PROJECT_MAX_ITER: usize = 60;

#[derive(Debug, Clone, Serialize)]
pub struct FullSolution {
    pub x: Point,
    pub p: ParameterPoint,
    /// Max-norm of the full residual at `(x, p)`.
    pub residual: f64,
}

impl FullSolution {
    /// Pattern of `Φ` at this solution and the reduced residual evaluated at
    /// `x_J` taken from the solution.
    pub fn reduce(&self, scene: &SceneSystem, h: &Hyperplane) -> Result<(PivotPattern, DVector<f64>)> {
        let delta = detect_pattern(&super::system::phi(scene, &self.p)?, CORANK_TOL);
        let xj = DVector::from_iterator(delta.s, delta.cols.iter().map(|&j| self.x[j]));
        let r = reduced_residual(scene, h, &delta, &self.p, &xj)?;
        Ok((delta, r))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HyperplaneSolutions {
    pub count: usize,
    pub solutions: Vec<FullSolution>,
    pub starts: usize,
    /// `log10 p_k(n)`.
    pub bound_log10: f64,
    pub within_bound: bool,
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Gauss–Newton onto `M ∩ h`; `None` if it does not converge.
fn project_to_slice(scene: &SceneSystem, h: &Hyperplane, x0: &Point) -> Option<Point> {
    let k = scene.codim();
    let tol = 1e-13 * scene.ball_radius().max(1.0);
    let mut x = x0.clone();
    for _ in 0..PROJECT_MAX_ITER {
        let mut f = DVector::zeros(k + 1);
        let mut rows: Vec<Point> = manifold::constraint_gradients(scene, &x);
        for (i, q) in scene.equations().enumerate() {
            f[i] = q.value(&x);
        }
        f[k] = h.side_unchecked(&x);
        if max_abs(&f) <= tol {
            return Some(x);
        }
        rows.push(h.normal().clone());
        let j = linalg::rows_to_matrix(&rows);
        let d = linalg::pinv_solve(&j, &f, 1e-12);
        x -= d;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    None
}

/// Initial `(λ, μ, u)` at a point of `M`: `u` from the multipliers, `(λ, μ)`
/// from the least-squares fit of `2 S ∇_M P` onto `{∇P, ∇Q_i}`.
fn initial_parameters(scene: &SceneSystem, x: &Point) -> Option<ParameterPoint> {
    let p = scene.morse()?;
    let td = manifold::tangent_data(scene, p, x).ok()?;
    let s = s_of_u(scene, &td.u).ok()?;
    let target = s * &td.grad_mp * 2.0;
    let mut cols = vec![td.grad_p.clone()];
    cols.extend(td.grad_q.iter().cloned());
    let a = linalg::rows_to_matrix(&cols).transpose();
    let coef = linalg::pinv_solve(&a, &target, 1e-12);
    let k = scene.codim();
    Some(ParameterPoint {
        lambda: coef[0],
        mu: coef.rows(1, k).into_owned(),
        u: td.u,
    })
}

fn split(z: &DVector<f64>, n: usize) -> (Point, ParameterPoint) {
    (z.rows(0, n).into_owned(), ParameterPoint::from_vector(&z.rows(n, z.len() - n).into_owned()))
}

/// Armijo-damped Newton on the full system.
fn newton(scene: &SceneSystem, h: &Hyperplane, x: Point, p: ParameterPoint) -> Option<FullSolution> {
    let n = scene.dim();
    let mut z = DVector::zeros(n + 2 * p.k() + 1);
    z.rows_mut(0, n).copy_from(&x);
    z.rows_mut(n, 2 * p.k() + 1).copy_from(&p.to_vector());
    let eval = |z: &DVector<f64>| {
        let (x, p) = split(z, n);
        full_residual(scene, h, &x, &p).ok()
    };
    let mut f = eval(&z)?;
    for _ in 0..NEWTON_MAX_ITER {
        if max_abs(&f) <= ACCEPT_RESIDUAL {
            break;
        }
        let (x, p) = split(&z, n);
        let jac: DMatrix<f64> = full_jacobian(scene, h, &x, &p).ok()?;
        let d = jac.clone().lu().solve(&f).unwrap_or_else(|| linalg::pinv_solve(&jac, &f, 1e-14));
        let f0 = f.norm();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &z - &d * t;
            if let Some(fc) = eval(&cand) {
                if fc.norm() <= (1.0 - 1e-4 * t) * f0 {
                    z = cand;
                    f = fc;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let residual = max_abs(&f);
    if !(residual <= ACCEPT_RESIDUAL) {
        return None;
    }
    let (x, p) = split(&z, n);
    Some(FullSolution { x, p, residual })
}

/// Counts points of `h ∩ θ_M(P)` by multistart Newton on the full system.
///
/// Starts are the `starts` points nearest `h` among `4·starts` seeded samples
/// of `M`, each projected onto `M ∩ h`. Converged roots inside the ball and
/// the inequality region are deduplicated at radius `1e-5 · R`. The count is
/// a lower bound on the true number of roots.
pub fn count_hyperplane_solutions(scene: &SceneSystem, h: &Hyperplane, starts: usize, seed: u64) -> Result<HyperplaneSolutions> {
    check_dim(scene.dim(), h.dim())?;
    scene.require_morse()?;
    let n = scene.dim();
    let k = scene.codim();
    let r = scene.ball_radius();
    let pool = match manifold::sample_points(scene, starts.saturating_mul(4).max(1), seed) {
        Ok(v) => v,
        Err(Error::SamplingStarved { .. }) => vec![],
        Err(e) => return Err(e),
    };
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| h.side_unchecked(&pool[a]).abs().total_cmp(&h.side_unchecked(&pool[b]).abs()));
    order.truncate(starts);
    let found: Vec<Option<FullSolution>> = order
        .par_iter()
        .map(|&i| {
            let x = project_to_slice(scene, h, &pool[i])?;
            let p = initial_parameters(scene, &x)?;
            let sol = newton(scene, h, x, p)?;
            (sol.x.norm() <= r * (1.0 + 1e-12) && scene.inequalities_hold(&sol.x, 1e-9)).then_some(sol)
        })
        .collect();
    let mut solutions: Vec<FullSolution> = Vec::new();
    for sol in found.into_iter().flatten() {
        if solutions.iter().all(|s| (&s.x - &sol.x).norm() > DEDUP_RADIUS * r) {
            solutions.push(sol);
        }
    }
    let bound = bound_p(k, n);
    let within_bound = (solutions.len() as f64) <= bound.value || bound.value.is_infinite();
    debug_assert!(within_bound, "solution count exceeds p_k(n)");
    Ok(HyperplaneSolutions {
        count: solutions.len(),
        solutions,
        starts: order.len(),
        bound_log10: bound.log10(),
        within_bound,
    })
}
