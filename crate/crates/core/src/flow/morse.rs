use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Result};
use crate::linalg;
use crate::manifold::{self, constraint_gradients};
use crate::rng;
use crate::{Point, Quadric, SceneSystem};

/// Quadric with `H` (lower triangle) and `L` drawn from a seeded standard
/// Gaussian and scaled by `magnitude`; `c = 0`.
pub fn generate_morse(n: usize, seed: u64, magnitude: f64) -> Quadric {
    let mut g = rng::substream(seed, "flow.morse", 0);
    let h = rng::gaussian_vector(&mut g, n * (n + 1) / 2) * magnitude;
    let l = rng::gaussian_vector(&mut g, n) * magnitude;
    Quadric::from_packed(h.iter().copied().collect(), l, 0.0).expect("finite by construction")
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub x: Point,
    pub value: f64,
    /// Number of negative eigenvalues of the reduced Hessian on `T_xM`.
    pub index: usize,
    /// Smallest eigenvalue magnitude of the reduced Hessian.
    pub min_abs_eigenvalue: f64,
    pub multipliers: DVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MorseReport {
    pub critical_points: Vec<CriticalPoint>,
    pub distinct_values: bool,
    pub nondegenerate: bool,
    /// Dimension of `M` (`n − k`); a critical point of this index is a local maximum.
    pub manifold_dim: usize,
    pub warnings: Vec<String>,
}

impl MorseReport {
    pub fn is_morse(&self) -> bool {
        !self.critical_points.is_empty() && self.distinct_values && self.nondegenerate
    }

    pub fn maxima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points.iter().filter(move |c| c.index == self.manifold_dim)
    }

    pub fn minima(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.critical_points.iter().filter(|c| c.index == 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MorseOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub merge_radius: f64,
}

impl Default for MorseOptions {
    fn default() -> Self {
        MorseOptions {
            starts: 256,
            max_iter: 60,
            merge_radius: 1e-6,
        }
    }
}

fn p_scale(p: &Quadric, radius: f64) -> f64 {
    1.0 + p.hessian_max_abs() * radius + p.linear().amax()
}

/// `F(x, u) = (∇P − Σ u_i ∇Q_i, Q_1, …, Q_k)`.
fn lagrange_system(scene: &SceneSystem, p: &Quadric, x: &Point, u: &DVector<f64>) -> DVector<f64> {
    let n = scene.dim();
    let k = scene.codim();
    let mut f = DVector::zeros(n + k);
    let mut g = p.gradient(x);
    for (q, ui) in scene.equations().zip(u.iter()) {
        g.axpy(-ui, &q.gradient(x), 1.0);
    }
    f.rows_mut(0, n).copy_from(&g);
    for (i, q) in scene.equations().enumerate() {
        f[n + i] = q.value(x);
    }
    f
}

/// `He(P) − Σ u_i He(Q_i)`.
pub(crate) fn reduced_hessian(scene: &SceneSystem, p: &Quadric, u: &DVector<f64>) -> DMatrix<f64> {
    let mut b = p.hessian();
    for (q, ui) in scene.equations().zip(u.iter()) {
        b -= q.hessian() * *ui;
    }
    b
}

fn newton_critical(scene: &SceneSystem, p: &Quadric, x0: &Point, opts: &MorseOptions, tol: f64) -> Option<(Point, DVector<f64>)> {
    let n = scene.dim();
    let k = scene.codim();
    let mut x = x0.clone();
    let mut u = manifold::tangent_data(scene, p, &x).map(|t| t.u).unwrap_or_else(|_| DVector::zeros(k));
    let mut f = lagrange_system(scene, p, &x, &u);
    for _ in 0..opts.max_iter {
        let fnorm = f.amax();
        if fnorm <= tol {
            return Some((x, u));
        }
        let grads = constraint_gradients(scene, &x);
        let b = reduced_hessian(scene, p, &u);
        let mut jac = DMatrix::zeros(n + k, n + k);
        jac.view_mut((0, 0), (n, n)).copy_from(&b);
        for (i, g) in grads.iter().enumerate() {
            for j in 0..n {
                jac[(j, n + i)] = -g[j];
                jac[(n + i, j)] = g[j];
            }
        }
        let step = match jac.clone().lu().solve(&f) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => linalg::pinv_solve(&jac, &f, 1e-12),
        };
        // Backtracking on the residual max-norm.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xn = &x - step.rows(0, n) * t;
            let un = &u - step.rows(n, k) * t;
            let fn_ = lagrange_system(scene, p, &xn, &un);
            if fn_.amax() < fnorm * (1.0 - 1e-4 * t) || fn_.amax() <= tol {
                x = xn;
                u = un;
                f = fn_;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (f.amax() <= tol).then_some((x, u))
}

/// Multistart Newton search for critical points of `P|_M`, with index and
/// nondegeneracy from the reduced Hessian on the tangent space.
pub fn morse_check(scene: &SceneSystem, p: &Quadric, seed: u64) -> Result<MorseReport> {
    morse_check_with(scene, p, seed, &MorseOptions::default())
}

pub fn morse_check_with(scene: &SceneSystem, p: &Quadric, seed: u64, opts: &MorseOptions) -> Result<MorseReport> {
    check_dim(scene.dim(), p.dim())?;
    let n = scene.dim();
    let k = scene.codim();
    let r = scene.ball_radius();
    let scale = p_scale(p, r);
    let tol = 1e-10 * scale;
    let mut warnings = Vec::new();
    let starts = match manifold::sample_points(scene, opts.starts, rng::derive_seed(seed, "flow.morse.starts")) {
        Ok(s) => s,
        Err(e) => {
            warnings.push(format!("start sampling: {e}"));
            Vec::new()
        }
    };
    let found: Vec<Option<(Point, DVector<f64>)>> = starts
        .par_iter()
        .map(|x0| {
            let (x, u) = newton_critical(scene, p, x0, opts, tol)?;
            (scene.inequalities_hold(&x, 1e-9)).then_some((x, u))
        })
        .collect();
    let mut crit: Vec<(Point, DVector<f64>)> = Vec::new();
    for (x, u) in found.into_iter().flatten() {
        if crit.iter().all(|(y, _)| (y - &x).norm() > opts.merge_radius * r.max(1.0)) {
            crit.push((x, u));
        }
    }
    let eig_tol = 1e-8 * scale;
    let mut points: Vec<CriticalPoint> = crit
        .into_iter()
        .map(|(x, u)| {
            let grads = constraint_gradients(scene, &x);
            let basis = linalg::orthogonal_complement(&grads, n);
            let b = reduced_hessian(scene, p, &u);
            let d = basis.len();
            let t = DMatrix::from_fn(n, d, |i, j| basis[j][i]);
            let red = t.transpose() * b * &t;
            let (vals, _) = if d > 0 { linalg::sym_eigen(&red) } else { (Vec::new(), DMatrix::zeros(0, 0)) };
            let index = vals.iter().filter(|&&v| v < -eig_tol).count();
            let min_abs = vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            CriticalPoint {
                value: p.value(&x),
                x,
                index,
                min_abs_eigenvalue: min_abs,
                multipliers: u,
            }
        })
        .collect();
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    let nondegenerate = points.iter().all(|c| c.min_abs_eigenvalue > eig_tol);
    let val_tol = 1e-9 * scale;
    let distinct_values = points.windows(2).all(|w| (w[1].value - w[0].value).abs() > val_tol);
    if points.is_empty() && !starts.is_empty() {
        warnings.push("search incomplete: no critical points found on a nonempty M".into());
    }
    Ok(MorseReport {
        critical_points: points,
        distinct_values,
        nondegenerate,
        manifold_dim: n - k,
        warnings,
    })
}
