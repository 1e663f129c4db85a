use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::manifold::{self, ON_MANIFOLD_TOL};
use crate::{Point, Polyline, Quadric, SceneSystem};

use super::{default_tolerance, eigen_residual, eigen_residual_of, frame_at, frame_equations, initial_anchor, residual_unit, stall_tol};

const CORRECT_MAX_ITER: usize = 40;
const CHORD_MAX_ITER: usize = 12;
/// Singular values of the scaled Jacobian below this count toward the kernel.
const KERNEL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Continuation step; `None` means `1e-3 · R`.
    pub step: Option<f64>,
    /// Branch merge radius; `None` means `1e-4 · R`.
    pub merge_radius: Option<f64>,
    /// Tolerance on the eigenvector residual; `None` uses the scene default.
    pub tol: Option<f64>,
    pub max_vertices: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            step: None,
            merge_radius: None,
            tol: None,
            max_vertices: 200_000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThalwegCurve {
    pub branches: Vec<Polyline>,
    /// Largest eigenvector residual over all vertices.
    pub max_residual: f64,
    pub seeds_used: usize,
    pub tolerance: f64,
    pub warnings: Vec<String>,
}

impl ThalwegCurve {
    pub fn lengths(&self) -> Vec<f64> {
        self.branches.iter().map(Polyline::length).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths().iter().fold(0.0, |s, l| s + l)
    }
}

/// Seeded samples of `M` to start tracing from.
pub fn default_seeds(scene: &SceneSystem, count: usize, seed: u64) -> Result<Vec<Point>> {
    manifold::sample_points(scene, count, seeds_stream(seed))
}

fn seeds_stream(seed: u64) -> u64 {
    crate::rng::derive_seed(seed, "thalweg.seeds")
}

struct Ctx<'a> {
    scene: &'a SceneSystem,
    p: &'a Quadric,
    tol: f64,
    stall: f64,
    /// Row scale of the eigenvector equations' Jacobian.
    eig_row_scale: f64,
    fd_step: f64,
}

impl Ctx<'_> {
    fn eval(&self, x: &Point, anchor: &[Point]) -> Option<DVector<f64>> {
        frame_equations(self.scene, self.p, x, anchor).map(|(f, _)| f)
    }

    /// Central-difference Jacobian of the frame equations.
    fn jacobian(&self, x: &Point, anchor: &[Point]) -> Option<DMatrix<f64>> {
        let n = x.len();
        let mut jac = DMatrix::zeros(n - 1, n);
        for j in 0..n {
            let mut a = x.clone();
            let mut b = x.clone();
            a[j] += self.fd_step;
            b[j] -= self.fd_step;
            let col = (self.eval(&a, anchor)? - self.eval(&b, anchor)?) / (2.0 * self.fd_step);
            jac.set_column(j, &col);
        }
        Some(jac)
    }

    /// Kernel dimension and unit kernel vector of the Jacobian, with the
    /// equation rows brought to unit scale.
    fn kernel(&self, jac: &DMatrix<f64>) -> (usize, Point) {
        let k = self.scene.codim();
        let mut js = jac.clone();
        for i in 0..js.nrows() {
            let s = if i < k {
                js.row(i).norm().max(f64::MIN_POSITIVE)
            } else {
                self.eig_row_scale
            };
            js.row_mut(i).scale_mut(1.0 / s);
        }
        let (vals, vecs) = linalg::sym_eigen(&(js.transpose() * &js));
        let dim = vals.iter().filter(|&&v| v <= KERNEL_TOL * KERNEL_TOL).count();
        (dim, vecs.column(0).into_owned())
    }

    fn accepted(&self, x: &Point) -> Option<f64> {
        if self.scene.equation_residual(x) > ON_MANIFOLD_TOL {
            return None;
        }
        let td = manifold::tangent_data(self.scene, self.p, x).ok()?;
        let r = eigen_residual_of(self.scene, self.p, &td);
        (r <= self.tol).then_some(r)
    }

    /// Gauss–Newton (minimum-norm steps) onto the curve.
    fn correct(&self, x0: &Point) -> Option<Point> {
        let td = manifold::tangent_data(self.scene, self.p, x0).ok()?;
        let anchor = initial_anchor(&td, self.stall);
        let mut x = x0.clone();
        for _ in 0..CORRECT_MAX_ITER {
            if self.accepted(&x).is_some() {
                return Some(x);
            }
            let f = self.eval(&x, &anchor)?;
            let jac = self.jacobian(&x, &anchor)?;
            let d = linalg::pinv_solve(&jac, &f, 1e-12);
            x -= d;
            if !x.iter().all(|v| v.is_finite()) || x.norm() > 2.0 * self.scene.ball_radius() {
                return None;
            }
        }
        let x = manifold::retract(self.scene, &x, ON_MANIFOLD_TOL, manifold::RETRACT_MAX_ITER).ok()?;
        self.accepted(&x).map(|_| x)
    }

    /// Pseudo-arclength corrector from the predicted point with a chord
    /// Jacobian; the extra row keeps `tᵀ(x − x_pred) = 0`.
    fn chord_correct(&self, pred: &Point, t: &Point, anchor: &[Point]) -> Option<Point> {
        let n = pred.len();
        let jac = self.jacobian(pred, anchor)?;
        let mut aug = DMatrix::zeros(n, n);
        aug.view_mut((0, 0), (n - 1, n)).copy_from(&jac);
        aug.set_row(n - 1, &t.transpose());
        let lu = aug.lu();
        let mut x = pred.clone();
        for _ in 0..CHORD_MAX_ITER {
            if self.accepted(&x).is_some() {
                return Some(x);
            }
            let f = self.eval(&x, anchor)?;
            let mut rhs = DVector::zeros(n);
            rhs.rows_mut(0, n - 1).copy_from(&f);
            rhs[n - 1] = t.dot(&(&x - pred));
            x -= lu.solve(&rhs)?;
        }
        self.accepted(&x).map(|_| x)
    }
}

enum End {
    Closed,
    LeftBall,
    Critical,
    Degenerate(usize),
    Stuck,
    MaxVertices,
}

/// Continues one direction from `start`; returns the vertices after `start`.
fn continue_branch(ctx: &Ctx, start: &Point, sign: f64, h0: f64, min_h: f64, max_vertices: usize) -> (Vec<Point>, End) {
    let r = ctx.scene.ball_radius();
    let mut out: Vec<Point> = Vec::new();
    let Ok(td) = manifold::tangent_data(ctx.scene, ctx.p, start) else { return (out, End::Stuck) };
    let mut anchor = initial_anchor(&td, ctx.stall);
    let mut x = start.clone();
    let mut t_prev: Option<Point> = None;
    let mut h = h0;
    let mut arc = 0.0;
    loop {
        if out.len() >= max_vertices {
            return (out, End::MaxVertices);
        }
        let Some(jac) = ctx.jacobian(&x, &anchor) else { return (out, End::Stuck) };
        let (kdim, mut t) = ctx.kernel(&jac);
        if kdim != 1 {
            return (out, End::Degenerate(kdim));
        }
        let orient = match &t_prev {
            Some(tp) => tp.dot(&t),
            None => sign,
        };
        if orient < 0.0 {
            t = -t;
        }
        let next = loop {
            let pred = &x + &t * h;
            match ctx.chord_correct(&pred, &t, &anchor) {
                Some(y) if (&y - &x).norm() > 0.25 * h && (&y - &x).norm() < 2.0 * h => break Some(y),
                _ if h > min_h => h /= 2.0,
                _ => break None,
            }
        };
        let Some(y) = next else { return (out, End::Stuck) };
        if y.norm() > r {
            return (out, End::LeftBall);
        }
        arc += (&y - &x).norm();
        if arc > 4.0 * h0 && (&y - start).norm() <= 1.5 * h0 {
            return (out, End::Closed);
        }
        let Ok(td) = manifold::tangent_data(ctx.scene, ctx.p, &y) else { return (out, End::Stuck) };
        let critical = td.grad_mp.norm() < ctx.stall;
        if let Some(f) = frame_at(&td, ctx.stall, &anchor) {
            anchor = f;
        }
        out.push(y.clone());
        if critical {
            return (out, End::Critical);
        }
        t_prev = Some(t);
        x = y;
        h = (h * 2.0).min(h0);
    }
}

/// [`trace_thalweg_with`] using default options.
pub fn trace_thalweg(scene: &SceneSystem, p: &Quadric, seeds: &[Point]) -> Result<ThalwegCurve> {
    trace_thalweg_with(scene, p, seeds, &TraceOptions::default())
}

/// Corrects every seed onto `θ_M(P)` and traces the branch through it in
/// both directions by pseudo-arclength continuation. Seeds landing on an
/// already traced branch are skipped; branches within the merge radius of
/// another (Hausdorff) are dropped.
pub fn trace_thalweg_with(scene: &SceneSystem, p: &Quadric, seeds: &[Point], opts: &TraceOptions) -> Result<ThalwegCurve> {
    check_dim(scene.dim(), p.dim())?;
    for s in seeds {
        check_dim(scene.dim(), s.len())?;
    }
    let n = scene.dim();
    let k = scene.codim();
    if n < k + 1 {
        return Err(Error::InvalidArgument("thalweg tracing needs dim M ≥ 1".into()));
    }
    let r = scene.ball_radius();
    let h0 = opts.step.unwrap_or(1e-3 * r);
    let merge = opts.merge_radius.unwrap_or(1e-4 * r);
    let tol = opts.tol.unwrap_or_else(|| default_tolerance(scene, p));
    let ctx = Ctx {
        scene,
        p,
        tol,
        stall: stall_tol(scene, p),
        eig_row_scale: residual_unit(scene, p) / r,
        fd_step: 1e-6 * r,
    };
    let corrected: Vec<Option<Point>> = seeds.par_iter().map(|s| ctx.correct(s)).collect();
    let landed: Vec<Point> = corrected.into_iter().flatten().filter(|x| scene.inequalities_hold(x, 0.0)).collect();
    if landed.is_empty() {
        return Err(Error::NoThalweg { seeds: seeds.len() });
    }
    let mut branches: Vec<Polyline> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let warn = |w: String, warnings: &mut Vec<String>| {
        if !warnings.contains(&w) {
            warnings.push(w);
        }
    };
    let mut seeds_used = 0;
    for s in &landed {
        if branches.iter().any(|b| b.distance_to(s) <= merge) {
            continue;
        }
        seeds_used += 1;
        let (fwd, end_f) = continue_branch(&ctx, s, 1.0, h0, 1e-4 * h0, opts.max_vertices);
        let mut verts: Vec<Point> = Vec::new();
        let mut closed = false;
        let mut ends = vec![end_f];
        match ends[0] {
            End::Closed => closed = true,
            End::Degenerate(_) => {}
            _ => {
                let (bwd, end_b) = continue_branch(&ctx, s, -1.0, h0, 1e-4 * h0, opts.max_vertices);
                verts.extend(bwd.into_iter().rev());
                ends.push(end_b);
            }
        }
        verts.push(s.clone());
        verts.extend(fwd);
        for e in &ends {
            match e {
                End::Degenerate(d) => warn(format!("degenerate: kernel dimension {d}; try perturbing P"), &mut warnings),
                End::Stuck => warn("branch terminated: corrector failed to converge".into(), &mut warnings),
                End::MaxVertices => warn("branch terminated: vertex limit reached".into(), &mut warnings),
                End::Closed | End::LeftBall | End::Critical => {}
            }
        }
        branches.push(Polyline::new(verts, closed)?);
    }
    // Hausdorff merge: drop branches entirely within `merge` of a longer one.
    branches.sort_by(|a, b| b.length().total_cmp(&a.length()));
    let mut kept: Vec<Polyline> = Vec::new();
    for b in branches {
        let covered = kept.iter().any(|k| b.vertices().iter().all(|v| k.distance_to(v) <= merge));
        if !covered {
            kept.push(b);
        }
    }
    let residuals: Vec<f64> = kept
        .par_iter()
        .flat_map_iter(|b| b.vertices().iter().map(|v| eigen_residual(scene, p, v).unwrap_or(f64::INFINITY)))
        .collect();
    let max_residual = residuals.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(ThalwegCurve {
        branches: kept,
        max_residual,
        seeds_used,
        tolerance: tol,
        warnings,
    })
}
