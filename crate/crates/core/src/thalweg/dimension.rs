use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::manifold;
use crate::{Point, Quadric, SceneSystem};

use super::{default_tolerance, frame_equations, initial_anchor, stall_tol};

const LADDER: [f64; 4] = [8.0, 4.0, 2.0, 1.0];
const MIN_CELLS: usize = 4;
const MAX_SAMPLES: usize = 400_000;

#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    /// `(cell edge, occupied cells)` per ladder rung.
    pub counts: Vec<(f64, usize)>,
    pub samples: usize,
}

/// Estimated distance from `x` to the zero set of the eigenvector equations,
/// from one Gauss–Newton step restricted to `T_xM`.
fn band_distance(scene: &SceneSystem, p: &Quadric, x: &Point, tol: f64, stall: f64) -> Option<f64> {
    let td = manifold::tangent_data(scene, p, x).ok()?;
    let anchor = initial_anchor(&td, stall);
    let k = scene.codim();
    let (f, _) = frame_equations(scene, p, x, &anchor)?;
    let fe = f.rows(k, f.len() - k).into_owned();
    if fe.is_empty() || fe.norm() <= tol {
        return Some(0.0);
    }
    let tangent = linalg::orthogonal_complement(&td.grad_q, x.len());
    let step = 1e-6 * scene.ball_radius();
    let mut jac = nalgebra::DMatrix::zeros(fe.len(), tangent.len());
    for (j, t) in tangent.iter().enumerate() {
        let a = frame_equations(scene, p, &(x + t * step), &anchor)?.0;
        let b = frame_equations(scene, p, &(x - t * step), &anchor)?.0;
        let col = (a.rows(k, fe.len()) - b.rows(k, fe.len())) / (2.0 * step);
        jac.set_column(j, &col);
    }
    Some(linalg::pinv_solve(&jac, &fe, 1e-12).norm())
}

/// Box-counting slope of the zero set of the eigenvector residual on `M`.
/// Samples `M`, keeps points whose estimated distance to the zero set is at
/// most half the cell edge, and fits `log N(ε)` against `log(1/ε)` over
/// `ε ∈ resolution · {8, 4, 2, 1}`.
pub fn dimension_check(scene: &SceneSystem, p: &Quadric, resolution: f64, seed: u64) -> Result<DimensionEstimate> {
    check_dim(scene.dim(), p.dim())?;
    let n = scene.dim();
    if n > 4 {
        return Err(Error::InvalidArgument("dimension check is limited to n ≤ 4".into()));
    }
    let r = scene.ball_radius();
    if !(resolution > 0.0 && resolution < r) {
        return Err(Error::InvalidArgument("resolution must lie in (0, R)".into()));
    }
    let m_dim = n.saturating_sub(scene.codim()).max(1) as i32;
    let samples = ((50.0 * (r / resolution).powi(m_dim)).ceil() as usize).min(MAX_SAMPLES);
    let pts = manifold::sample_points(scene, samples, crate::rng::derive_seed(seed, "thalweg.dimension"))?;
    let tol = default_tolerance(scene, p);
    let stall = stall_tol(scene, p);
    let dists: Vec<Option<f64>> = pts.par_iter().map(|x| band_distance(scene, p, x, tol, stall)).collect();
    let mut counts = Vec::with_capacity(LADDER.len());
    for f in LADDER {
        let eps = f * resolution;
        let cells: HashSet<Vec<i64>> = pts
            .iter()
            .zip(&dists)
            .filter(|(_, d)| matches!(d, Some(d) if *d <= eps / 2.0))
            .map(|(x, _)| x.iter().map(|c| (c / eps).floor() as i64).collect())
            .collect();
        if cells.len() < MIN_CELLS {
            return Err(Error::Inconclusive(format!("only {} occupied cells at edge {eps}", cells.len())));
        }
        counts.push((eps, cells.len()));
    }
    let xs: Vec<f64> = counts.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(DimensionEstimate {
        slope: sxy / sxx,
        counts,
        samples: pts.len(),
    })
}
