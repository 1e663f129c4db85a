use nalgebra::DVector;
use serde::Serialize;

use crate::linalg;
use crate::{Point, Quadric};

#[derive(Debug, Clone, Serialize)]
pub struct BallExtremum {
    pub value: f64,
    pub x: Point,
    pub on_boundary: bool,
}

/// Minimizer of `½ xᵀA x + bᵀx` over `‖x‖ ≤ ρ` (without the constant),
/// the classical trust-region subproblem.
fn trust_region_min(a: &nalgebra::DMatrix<f64>, b: &DVector<f64>, rho: f64) -> (Point, bool) {
    let n = b.len();
    let (lam, q) = linalg::sym_eigen(a);
    let beta = q.transpose() * b;
    let scale = lam.iter().fold(b.norm() / rho.max(f64::MIN_POSITIVE), |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let lmin = lam[0];
    let obj = |x: &Point| 0.5 * x.dot(&(a * x)) + b.dot(x);
    let at = |sigma: f64| -> Point {
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let d = lam[i] + sigma;
            if d.abs() > 0.0 {
                y[i] = -beta[i] / d;
            }
        }
        &q * y
    };
    let mut cands: Vec<(Point, bool)> = Vec::new();
    // Interior stationary point.
    if lmin > 1e-14 * scale {
        let x = at(0.0);
        if x.norm() <= rho {
            cands.push((x, false));
        }
    }
    // Hard case: b orthogonal to the bottom eigenspace.
    let bottom: Vec<usize> = (0..n).filter(|&i| lam[i] <= lmin + 1e-12 * scale).collect();
    let b_bottom: f64 = bottom.iter().map(|&i| beta[i] * beta[i]).sum::<f64>().sqrt();
    if b_bottom <= 1e-13 * scale * rho {
        let mut y = DVector::zeros(n);
        for i in 0..n {
            if !bottom.contains(&i) {
                y[i] = -beta[i] / (lam[i] - lmin);
            }
        }
        let xt = &q * y;
        let rest = rho * rho - xt.norm_squared();
        if rest >= 0.0 {
            let dir = q.column(bottom[0]).into_owned();
            cands.push((&xt + &dir * rest.sqrt(), true));
            cands.push((&xt - &dir * rest.sqrt(), true));
        }
    }
    // Boundary solution of the secular equation ‖x(σ)‖ = ρ, σ > −λ_min.
    let mut lo = -lmin;
    let mut hi = -lmin + b.norm() / rho + 1e-300;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid).norm() > rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = at(hi);
    if x.norm() > 0.0 {
        // Pin to the sphere; the bisection leaves ‖x‖ within rounding of ρ.
        cands.push((&x * (rho / x.norm()), true));
    }
    if cands.is_empty() {
        cands.push((DVector::zeros(n), false));
    }
    cands
        .into_iter()
        .min_by(|u, v| obj(&u.0).total_cmp(&obj(&v.0)))
        .expect("non-empty")
}

fn extremum(q: &Quadric, radius: f64, sign: f64) -> BallExtremum {
    let a = q.hessian() * (-sign);
    let b = q.linear() * (-sign);
    let (x, on_boundary) = trust_region_min(&a, &b, radius);
    BallExtremum {
        value: q.value(&x),
        x,
        on_boundary,
    }
}

/// Exact maximum of `Q` over `‖x‖ ≤ radius`.
pub fn maximize_on_ball(q: &Quadric, radius: f64) -> BallExtremum {
    extremum(q, radius, 1.0)
}

/// Exact minimum of `Q` over `‖x‖ ≤ radius`.
pub fn minimize_on_ball(q: &Quadric, radius: f64) -> BallExtremum {
    extremum(q, radius, -1.0)
}

/// `max_{‖x‖ ≤ radius} |Q(x)|`.
pub fn max_abs_on_ball(q: &Quadric, radius: f64) -> f64 {
    maximize_on_ball(q, radius).value.max(-minimize_on_ball(q, radius).value)
}
