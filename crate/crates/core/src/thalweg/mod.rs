//! The thalweg `θ_M(P)`: points of `M` where `∇_M P` is null or an
//! eigenvector of the reduced Hessian, i.e. critical points of `‖∇_M P‖`
//! on the level sets of `P|_M`.

mod dimension;
mod perturb;
mod trace;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::manifold::{self, TangentData};
use crate::{Point, Quadric, SceneSystem};

pub use dimension::{dimension_check, DimensionEstimate};
pub use perturb::{perturb, Perturbation};
pub use trace::{default_seeds, trace_thalweg, trace_thalweg_with, ThalwegCurve, TraceOptions};

/// `‖∇_M P‖` below `STALL_REL · scale(P)` counts as a critical point.
pub const STALL_REL: f64 = 1e-9;

/// Magnitude of `‖∇P‖` over the ball.
pub(crate) fn grad_scale(p: &Quadric, radius: f64) -> f64 {
    (p.hessian().norm() * radius + p.linear().norm()).max(f64::MIN_POSITIVE)
}

pub(crate) fn stall_tol(scene: &SceneSystem, p: &Quadric) -> f64 {
    STALL_REL * grad_scale(p, scene.ball_radius())
}

/// Natural unit of both residuals: `scale(P)² / R`.
pub fn residual_unit(scene: &SceneSystem, p: &Quadric) -> f64 {
    let s = grad_scale(p, scene.ball_radius());
    s * s / scene.ball_radius()
}

/// Default tolerance on [`eigen_residual`] for points accepted as thalweg points.
pub fn default_tolerance(scene: &SceneSystem, p: &Quadric) -> f64 {
    1e-8 * residual_unit(scene, p)
}

/// Norm of `∇(‖∇_M P‖²)(x)` after projecting out `span{∇P, ∇Q_1, …, ∇Q_k}`;
/// zero exactly when some `(λ, μ)` makes it a combination of those gradients.
pub fn lagrange_residual(scene: &SceneSystem, p: &Quadric, x: &Point) -> Result<f64> {
    check_dim(scene.dim(), x.len())?;
    let td = manifold::tangent_data(scene, p, x)?;
    if td.grad_mp.norm() <= stall_tol(scene, p) {
        return Ok(0.0);
    }
    let g = td.reduced_hess_mul(scene, p, &td.grad_mp) * 2.0;
    let mut span = vec![td.grad_p.clone()];
    span.extend(td.grad_q.iter().cloned());
    let basis = linalg::orthonormalize(&span, 1e-12);
    Ok(linalg::project_out(&g, &basis).norm())
}

fn eigen_residual_of(scene: &SceneSystem, p: &Quadric, td: &TangentData) -> f64 {
    let v = &td.grad_mp;
    let vv = v.norm_squared();
    if vv.sqrt() <= stall_tol(scene, p) {
        return 0.0;
    }
    let w = td.project(&td.reduced_hess_mul(scene, p, v));
    (&w - v * (w.dot(v) / vv)).norm()
}

/// With `v = ∇_M P(x)`, `B = He(P) − Σ u_i He(Q_i)` and `w = p_x(Bv)`:
/// the part of `w` orthogonal to `v` (zero when `v` is below the stall
/// tolerance).
pub fn eigen_residual(scene: &SceneSystem, p: &Quadric, x: &Point) -> Result<f64> {
    check_dim(scene.dim(), x.len())?;
    let td = manifold::tangent_data(scene, p, x)?;
    Ok(eigen_residual_of(scene, p, &td))
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementViolation {
    pub index: usize,
    pub lagrange: f64,
    pub eigen: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub tolerance: f64,
    pub checked: usize,
    /// Points with either residual inside `(tol, 10·tol]`.
    pub excluded_band: usize,
    pub both_zero: usize,
    pub both_nonzero: usize,
    /// Points where the residuals raised an error (rank-deficient `G`).
    pub skipped: usize,
    pub violators: Vec<AgreementViolation>,
}

impl AgreementReport {
    pub fn agrees(&self) -> bool {
        self.violators.is_empty()
    }
}

/// Checks `lagrange ≤ tol ⇔ eigen ≤ tol` over `sample`, ignoring points
/// where either residual falls in the band `(tol, 10·tol]`.
pub fn residuals_agree(scene: &SceneSystem, p: &Quadric, sample: &[Point], tol: f64) -> Result<AgreementReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let per: Vec<Option<(f64, f64)>> = sample
        .par_iter()
        .map(|x| Some((lagrange_residual(scene, p, x).ok()?, eigen_residual(scene, p, x).ok()?)))
        .collect();
    let mut rep = AgreementReport {
        tolerance: tol,
        checked: 0,
        excluded_band: 0,
        both_zero: 0,
        both_nonzero: 0,
        skipped: 0,
        violators: vec![],
    };
    let in_band = |r: f64| r > tol && r <= 10.0 * tol;
    for (index, r) in per.into_iter().enumerate() {
        let Some((lagrange, eigen)) = r else {
            rep.skipped += 1;
            continue;
        };
        rep.checked += 1;
        if in_band(lagrange) || in_band(eigen) {
            rep.excluded_band += 1;
        } else if (lagrange <= tol) != (eigen <= tol) {
            rep.violators.push(AgreementViolation { index, lagrange, eigen });
        } else if lagrange <= tol {
            rep.both_zero += 1;
        } else {
            rep.both_nonzero += 1;
        }
    }
    Ok(rep)
}

/// Orthonormal frame of `T_xM ∩ v^⊥` obtained by projecting and
/// re-orthonormalizing the `anchor` vectors; keeps the frame continuous
/// along a branch. `None` when the anchors no longer span it.
pub(crate) fn frame_at(td: &TangentData, stall: f64, anchor: &[Point]) -> Option<Vec<Point>> {
    let mut normal: Vec<Point> = td.grad_q.clone();
    if td.grad_mp.norm() > stall {
        normal.push(td.grad_mp.clone());
    }
    let mut basis = linalg::orthonormalize(&normal, 1e-12);
    let want = td.x.len().checked_sub(td.codim() + 1)?;
    let mut frame = Vec::with_capacity(want);
    for a in anchor {
        if frame.len() == want {
            break;
        }
        let w = linalg::project_out(a, &basis);
        let nw = w.norm();
        if nw < 1e-3 * a.norm() {
            continue;
        }
        let e = w / nw;
        basis.push(e.clone());
        frame.push(e);
    }
    (frame.len() == want).then_some(frame)
}

/// Fresh anchor at `x`: any orthonormal basis of `T_xM ∩ v^⊥`.
pub(crate) fn initial_anchor(td: &TangentData, stall: f64) -> Vec<Point> {
    let mut normal: Vec<Point> = td.grad_q.clone();
    if td.grad_mp.norm() > stall {
        normal.push(td.grad_mp.clone());
    }
    linalg::orthogonal_complement(&normal, td.x.len())
}

/// `[Q_i(x); ⟨e_j, B v⟩]`, the `n − 1` equations cutting out the thalweg
/// near the anchor, plus the tangent data at `x`.
pub(crate) fn frame_equations(
    scene: &SceneSystem,
    p: &Quadric,
    x: &Point,
    anchor: &[Point],
) -> Option<(DVector<f64>, TangentData)> {
    let td = manifold::tangent_data(scene, p, x).ok()?;
    let stall = stall_tol(scene, p);
    let frame = frame_at(&td, stall, anchor)?;
    let k = scene.codim();
    let bv = td.reduced_hess_mul(scene, p, &td.grad_mp);
    let mut f = DVector::zeros(k + frame.len());
    for (i, q) in scene.equations().enumerate() {
        f[i] = q.value(x);
    }
    for (j, e) in frame.iter().enumerate() {
        f[k + j] = e.dot(&bv);
    }
    Some((f, td))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    fn sphere_axial() -> (SceneSystem, Quadric) {
        let s = SceneSystem::equations_only(vec![Quadric::sphere(&DVector::zeros(3), 0.9)], None, 1.0).unwrap();
        (s, Quadric::affine(point(&[0.0, 0.0, 1.0]), 0.0))
    }

    #[test]
    fn axial_sphere_residuals_vanish() {
        let (s, p) = sphere_axial();
        for x in manifold::sample_points(&s, 200, 3).unwrap() {
            assert!(lagrange_residual(&s, &p, &x).unwrap() < 1e-12);
            assert!(eigen_residual(&s, &p, &x).unwrap() < 1e-12);
        }
        let top = point(&[0.0, 0.0, 0.9]);
        assert_eq!(eigen_residual(&s, &p, &top).unwrap(), 0.0);
        assert_eq!(lagrange_residual(&s, &p, &top).unwrap(), 0.0);
    }

    #[test]
    fn curves_are_all_thalweg() {
        let s = SceneSystem::equations_only(vec![Quadric::sphere(&DVector::zeros(2), 0.9)], None, 1.0).unwrap();
        let p = Quadric::diagonal(&[0.7, -0.3], point(&[0.2, 0.4]), 0.0);
        for x in manifold::sample_points(&s, 100, 1).unwrap() {
            assert!(lagrange_residual(&s, &p, &x).unwrap() < 1e-12);
            assert!(eigen_residual(&s, &p, &x).unwrap() < 1e-12);
        }
    }

    #[test]
    fn lagrange_is_twice_eigen() {
        let q = Quadric::diagonal(&[2.0, 3.0, 5.0], DVector::zeros(3), -0.5);
        let s = SceneSystem::equations_only(vec![q], None, 1.0).unwrap();
        let p = Quadric::diagonal(&[0.3, -0.8, 0.5], point(&[0.1, 0.2, -0.3]), 0.0);
        for x in manifold::sample_points(&s, 50, 2).unwrap() {
            let l = lagrange_residual(&s, &p, &x).unwrap();
            let e = eigen_residual(&s, &p, &x).unwrap();
            assert!((l - 2.0 * e).abs() <= 1e-10 * l.max(1e-300), "{l} {e}");
        }
    }
}
