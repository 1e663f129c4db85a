use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold;
use crate::rng;
use crate::{Constraint, Point, Polyline, Quadric, Role, SceneSystem};

use super::trust::max_abs_on_ball;

#[derive(Debug, Clone, Serialize)]
pub struct ThickenedScene {
    #[serde(skip)]
    pub base: SceneSystem,
    pub eps: Vec<f64>,
    #[serde(skip)]
    pub result: SceneSystem,
}

/// Replaces every equation `Q_i = 0` by `ε_i − Q_i ≥ 0` and `Q_i + ε_i ≥ 0`;
/// inequalities are kept. Checks `M ⊆ M_ε` on a few samples of `M`.
pub fn thicken(scene: &SceneSystem, eps: &[f64]) -> Result<ThickenedScene> {
    crate::error::check_dim(scene.codim(), eps.len())?;
    if let Some(i) = eps.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!("eps[{i}] must be positive")));
    }
    let mut eq = 0;
    let mut constraints = Vec::with_capacity(scene.constraints().len() + scene.codim());
    for c in scene.constraints() {
        if c.role == Role::Eq {
            let e = eps[eq];
            eq += 1;
            constraints.push(Constraint::new(c.quadric.scaled(-1.0).shifted(e), Role::Ge));
            constraints.push(Constraint::new(c.quadric.shifted(e), Role::Ge));
        } else {
            constraints.push(c.clone());
        }
    }
    let result = scene.with_constraints(constraints)?;
    if let Ok(pts) = manifold::sample_points(scene, 32, 0) {
        if let Some(x) = pts.iter().find(|x| !result.inequalities_hold(x, 1e-12)) {
            return Err(Error::Inconclusive(format!("point of M outside the thickening: {x}")));
        }
    }
    Ok(ThickenedScene {
        base: scene.clone(),
        eps: eps.to_vec(),
        result,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsSearch {
    pub eps: Vec<f64>,
    /// Index of the accepted draw (0 = first).
    pub draw: usize,
    pub rejected: usize,
    /// Fibers examined per draw (subset, sign pattern, with or without sphere).
    pub fibers: usize,
    pub starts_per_fiber: usize,
    /// Smallest least-squares residual of the rank-deficiency system over the
    /// accepted draw; bounded away from zero when no degenerate point exists.
    pub min_residual: f64,
}

const MAX_DRAWS: usize = 20;
const STARTS: usize = 24;
const LM_ITERS: usize = 200;
const DEGENERATE_RESIDUAL: f64 = 1e-9;

/// One fiber: equations `Q_i = s_i ε_i` for `i` in the subset, optionally
/// with the sphere `‖x‖ = R`.
struct Fiber {
    quads: Vec<Quadric>,
}

/// Residual of `G_j(x) = 0`, `Σ λ_j ∇G_j(x) = 0`, `‖λ‖² = 1`.
fn rank_system(f: &Fiber, x: &Point, lam: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let m = f.quads.len();
    let mut r = DVector::zeros(m + n + 1);
    let mut j = DMatrix::zeros(m + n + 1, n + m);
    let mut comb = DVector::zeros(n);
    let mut hsum = DMatrix::zeros(n, n);
    for (i, q) in f.quads.iter().enumerate() {
        let g = q.gradient(x);
        r[i] = q.value(x);
        j.view_mut((i, 0), (1, n)).copy_from(&g.transpose());
        comb.axpy(lam[i], &g, 1.0);
        hsum += q.hessian() * lam[i];
        j.view_mut((m, n + i), (n, 1)).copy_from(&g);
    }
    r.rows_mut(m, n).copy_from(&comb);
    j.view_mut((m, 0), (n, n)).copy_from(&hsum);
    r[m + n] = lam.norm_squared() - 1.0;
    for i in 0..m {
        j[(m + n, n + i)] = 2.0 * lam[i];
    }
    (r, j)
}

/// Levenberg–Marquardt from one start; returns the final residual norm and
/// whether the point ended inside the ball.
fn lm_min(f: &Fiber, x0: Point, lam0: DVector<f64>, radius: f64) -> (f64, bool) {
    let n = x0.len();
    let m = f.quads.len();
    let mut z = DVector::zeros(n + m);
    z.rows_mut(0, n).copy_from(&x0);
    z.rows_mut(n, m).copy_from(&lam0);
    let eval = |z: &DVector<f64>| rank_system(f, &z.rows(0, n).into_owned(), &z.rows(n, m).into_owned());
    let (mut r, mut j) = eval(&z);
    let mut mu = 1e-3;
    for _ in 0..LM_ITERS {
        let jt = j.transpose();
        let mut a = &jt * &j;
        let g = &jt * &r;
        for d in 0..a.nrows() {
            a[(d, d)] += mu * (1.0 + a[(d, d)]);
        }
        let step = a.cholesky().map(|c| c.solve(&g)).unwrap_or_else(|| linalg::pinv_solve(&(&jt * &j), &g, 1e-14));
        let cand = &z - step;
        let (rc, jc) = eval(&cand);
        if rc.norm() < r.norm() {
            z = cand;
            r = rc;
            j = jc;
            mu = (mu * 0.3).max(1e-15);
            if r.norm() < 1e-14 {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    let inside = z.rows(0, n).norm() <= radius * (1.0 + 1e-9);
    (r.norm(), inside)
}

fn fibers(scene: &SceneSystem, eps: &[f64]) -> Vec<Fiber> {
    let n = scene.dim();
    let eqs: Vec<&Quadric> = scene.equations().collect();
    let k = eqs.len();
    let sphere = Quadric::sphere(&Point::zeros(n), scene.ball_radius());
    let mut out = Vec::new();
    for mask in 0u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        for signs in 0u32..(1 << idx.len()) {
            let quads: Vec<Quadric> = idx
                .iter()
                .enumerate()
                .map(|(p, &i)| {
                    let s = if signs & (1 << p) != 0 { -1.0 } else { 1.0 };
                    eqs[i].shifted(-s * eps[i])
                })
                .collect();
            if !quads.is_empty() {
                out.push(Fiber { quads: quads.clone() });
            }
            let mut with_sphere = quads;
            with_sphere.push(sphere.clone());
            out.push(Fiber { quads: with_sphere });
        }
    }
    out
}

/// Draws `ε = t · (max_B |Q_i|)_i` with `t` log-uniform in `[1e-3, 1e-1]`
/// and accepts the first draw for which no fiber `{Q_i = ±ε_i, i ∈ S}`
/// (alone or on the sphere `‖x‖ = R`) carries a point where its gradients
/// are dependent, judged by multistart Levenberg–Marquardt on the
/// rank-deficiency system.
pub fn regular_eps_search(scene: &SceneSystem, seed: u64) -> Result<EpsSearch> {
    let k = scene.codim();
    if k == 0 {
        return Err(Error::InvalidArgument("no equations to thicken".into()));
    }
    if (1usize << k) * k > 1000 {
        return Err(Error::InvalidArgument(format!("k = {k} is too large for the subset check")));
    }
    let n = scene.dim();
    let r = scene.ball_radius();
    let max_abs: Vec<f64> = scene.equations().map(|q| max_abs_on_ball(q, r)).collect();
    if let Some(i) = max_abs.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateConstraint { index: i });
    }
    for draw in 0..MAX_DRAWS {
        let mut g = rng::substream(seed, "reduction.eps", draw as u64);
        let t = 10f64.powf(-1.0 - 2.0 * g.random::<f64>());
        let eps: Vec<f64> = max_abs.iter().map(|m| t * m).collect();
        let fib = fibers(scene, &eps);
        let jobs: Vec<(usize, usize)> = (0..fib.len()).flat_map(|f| (0..STARTS).map(move |s| (f, s))).collect();
        let results: Vec<(usize, f64, bool)> = jobs
            .par_iter()
            .map(|&(f, s)| {
                let mut g = rng::substream(seed, "reduction.eps.starts", ((draw * fib.len() + f) * STARTS + s) as u64);
                let x0 = rng::uniform_in_ball(&mut g, n, r);
                let lam0 = rng::unit_vector(&mut g, fib[f].quads.len());
                let (res, inside) = lm_min(&fib[f], x0, lam0, r);
                (f, res, inside)
            })
            .collect();
        let scale = max_abs.iter().cloned().fold(1.0, f64::max);
        let degenerate = results.iter().any(|(_, res, inside)| *inside && *res <= DEGENERATE_RESIDUAL * scale);
        if !degenerate {
            let min_residual = results.iter().map(|(_, res, _)| *res).fold(f64::INFINITY, f64::min);
            return Ok(EpsSearch {
                eps,
                draw,
                rejected: draw,
                fibers: fib.len(),
                starts_per_fiber: STARTS,
                min_residual,
            });
        }
    }
    Err(Error::NoRegularEps { draws: MAX_DRAWS })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictReplacement {
    #[serde(skip)]
    pub scene: SceneSystem,
    pub eps_strict: f64,
    pub replaced: usize,
}

const PATH_SUBDIVISION: usize = 16;

/// Replaces every `Q_i > 0` by `Q_i − ε ≥ 0`. With witness paths, `ε` is
/// the least value of any strict `Q_i` along them (vertices and 16 points
/// per segment); otherwise `eps` must be supplied.
pub fn strict_to_nonstrict(scene: &SceneSystem, witness_paths: Option<&[Polyline]>, eps: Option<f64>) -> Result<StrictReplacement> {
    let strict: Vec<usize> = (0..scene.constraints().len()).filter(|&i| scene.constraints()[i].role == Role::Gt).collect();
    if strict.is_empty() {
        return Ok(StrictReplacement {
            scene: scene.clone(),
            eps_strict: 0.0,
            replaced: 0,
        });
    }
    let eps_strict = match (witness_paths, eps) {
        (Some(paths), _) if !paths.is_empty() => {
            let mut best = f64::INFINITY;
            for (pi, path) in paths.iter().enumerate() {
                let pts = densify(path);
                for &ci in &strict {
                    let q = &scene.constraints()[ci].quadric;
                    let v = pts.iter().map(|x| q.value(x)).fold(f64::INFINITY, f64::min);
                    if !(v > 0.0) {
                        return Err(Error::PathNotInterior {
                            constraint: ci,
                            path: pi,
                            value: v,
                        });
                    }
                    best = best.min(v);
                }
            }
            best
        }
        (_, Some(e)) if e > 0.0 && e.is_finite() => e,
        _ => return Err(Error::InvalidArgument("strict inequalities need witness paths or a positive eps".into())),
    };
    let constraints = scene
        .constraints()
        .iter()
        .map(|c| match c.role {
            Role::Gt => Constraint::new(c.quadric.shifted(-eps_strict), Role::Ge),
            _ => c.clone(),
        })
        .collect();
    Ok(StrictReplacement {
        scene: scene.with_constraints(constraints)?,
        eps_strict,
        replaced: strict.len(),
    })
}

fn densify(path: &Polyline) -> Vec<Point> {
    let mut out: Vec<Point> = path.vertices().to_vec();
    for (a, b) in path.segments() {
        for s in 1..PATH_SUBDIVISION {
            let t = s as f64 / PATH_SUBDIVISION as f64;
            out.push(a * (1.0 - t) + b * t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    fn circle() -> SceneSystem {
        SceneSystem::equations_only(vec![Quadric::sphere(&Point::zeros(2), 0.9)], None, 1.0).unwrap()
    }

    #[test]
    fn circle_thickens_to_annulus() {
        let t = thicken(&circle(), &[0.1]).unwrap();
        // Q = ‖x‖² − 0.81 so the annulus is 0.71 ≤ ‖x‖² ≤ 0.91.
        assert!(t.result.inequalities_hold(&point(&[0.0, 0.71f64.sqrt() + 1e-9]), 0.0));
        assert!(t.result.inequalities_hold(&point(&[0.91f64.sqrt() - 1e-9, 0.0]), 0.0));
        assert!(!t.result.inequalities_hold(&point(&[0.0, 0.70f64.sqrt()]), 0.0));
        assert!(!t.result.inequalities_hold(&point(&[0.92f64.sqrt(), 0.0]), 0.0));
        assert!(thicken(&circle(), &[0.0]).is_err());
    }

    #[test]
    fn circle_accepts_first_draw_and_is_deterministic() {
        let a = regular_eps_search(&circle(), 5).unwrap();
        assert_eq!(a.draw, 0);
        let b = regular_eps_search(&circle(), 5).unwrap();
        assert_eq!(a.eps, b.eps);
    }

    #[test]
    fn duplicated_equation_is_rejected() {
        let q = Quadric::sphere(&Point::zeros(3), 0.9);
        let s = SceneSystem::equations_only(vec![q.clone(), q], None, 1.0).unwrap();
        assert!(matches!(regular_eps_search(&s, 1), Err(Error::NoRegularEps { .. })));
    }

    #[test]
    fn strict_replacement() {
        let q = Quadric::affine(point(&[1.0, 0.0]), 0.0);
        let s = SceneSystem::new(2, vec![Constraint::new(q, Role::Gt)], None, 1.0).unwrap();
        let path = Polyline::new(vec![point(&[0.3, -0.5]), point(&[0.6, 0.0]), point(&[0.3, 0.5])], false).unwrap();
        let out = strict_to_nonstrict(&s, Some(std::slice::from_ref(&path)), None).unwrap();
        assert!((out.eps_strict - 0.3).abs() < 1e-15);
        assert_eq!(out.scene.constraints()[0].role, Role::Ge);
        let bad = Polyline::new(vec![point(&[-0.1, 0.0]), point(&[0.5, 0.0])], false).unwrap();
        assert!(matches!(strict_to_nonstrict(&s, Some(&[bad]), None), Err(Error::PathNotInterior { .. })));
        assert_eq!(strict_to_nonstrict(&circle(), None, None).unwrap().replaced, 0);
    }
}
