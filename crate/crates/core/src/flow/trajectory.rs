use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::manifold::{self, ON_MANIFOLD_TOL, RETRACT_MAX_ITER};
use crate::{Point, Polyline, Quadric, SceneSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Ascent,
    Descent,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    CriticalPoint,
    MaxSteps,
    LeftBall,
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub polyline: Polyline,
    pub terminal: Terminal,
    /// Integrated arc length of the normalized flow (sum of accepted step
    /// sizes). The retracted polyline is never longer than this.
    pub arc_length: f64,
    /// Cumulative arc length at each vertex.
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Step size; `None` means `1e-3 · ball_radius`.
    pub step: Option<f64>,
    /// Stall threshold relative to the scale of `∇P`.
    pub stall_rel: f64,
    /// Smallest step (relative to the ball radius) before declaring a
    /// critical point reached.
    pub min_step_rel: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            step: None,
            stall_rel: 1e-7,
            min_step_rel: 1e-10,
        }
    }
}

/// Scale of `‖∇P‖` over the ball, used for the stall tolerance.
pub(crate) fn grad_scale(p: &Quadric, radius: f64) -> f64 {
    let h = p.hessian();
    h.norm() * radius + p.linear().norm()
}

/// Unit flow direction at `x`; `None` when `‖∇_M P‖` is below `stall`.
fn field(scene: &SceneSystem, p: &Quadric, x: &Point, sign: f64, stall: f64) -> Result<Option<Point>> {
    let td = manifold::tangent_data(scene, p, x)?;
    let nv = td.grad_mp.norm();
    if nv < stall {
        return Ok(None);
    }
    Ok(Some(td.grad_mp * (sign / nv)))
}

fn rk4(scene: &SceneSystem, p: &Quadric, x: &Point, h: f64, sign: f64, stall: f64) -> Result<Option<Point>> {
    let Some(k1) = field(scene, p, x, sign, stall)? else { return Ok(None) };
    let Some(k2) = field(scene, p, &(x + &k1 * (h / 2.0)), sign, stall)? else { return Ok(None) };
    let Some(k3) = field(scene, p, &(x + &k2 * (h / 2.0)), sign, stall)? else { return Ok(None) };
    let Some(k4) = field(scene, p, &(x + &k3 * h), sign, stall)? else { return Ok(None) };
    Ok(Some(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)))
}

/// Integrates `x' = ±∇_M P / ‖∇_M P‖` with RK4 steps, retracting onto `M`
/// after every step. Steps that would not strictly improve `P` are halved,
/// so the flow settles onto the critical point it is heading for.
pub fn integrate_trajectory(
    scene: &SceneSystem,
    p: &Quadric,
    x0: &Point,
    direction: Direction,
    max_len: f64,
    opts: &FlowOptions,
) -> Result<Trajectory> {
    check_dim(scene.dim(), x0.len())?;
    check_dim(scene.dim(), p.dim())?;
    let r = scene.ball_radius();
    let h0 = opts.step.unwrap_or(1e-3 * r);
    if !(h0 > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let sign = direction.sign();
    let stall = opts.stall_rel * grad_scale(p, r).max(f64::MIN_POSITIVE);
    let min_step = opts.min_step_rel * r;
    let mut x = manifold::retract(scene, x0, ON_MANIFOLD_TOL, RETRACT_MAX_ITER)?;
    let mut poly = Polyline::empty();
    poly.push(x.clone());
    let mut cumulative = vec![0.0];
    let mut arc = 0.0;
    let mut h = h0;
    let abort = |poly: &Polyline, cumulative: &Vec<f64>, arc: f64, reason: String| Error::TrajectoryAborted {
        partial: Box::new(Trajectory {
            polyline: poly.clone(),
            terminal: Terminal::Stalled,
            arc_length: arc,
            cumulative: cumulative.clone(),
        }),
        reason,
    };
    let terminal = loop {
        if arc >= max_len {
            break Terminal::MaxSteps;
        }
        let h_try = h.min(max_len - arc).max(min_step);
        let prop = match rk4(scene, p, &x, h_try, sign, stall) {
            Ok(Some(y)) => y,
            Ok(None) => break Terminal::CriticalPoint,
            Err(e) => return Err(abort(&poly, &cumulative, arc, e.to_string())),
        };
        let y = match manifold::retract(scene, &prop, ON_MANIFOLD_TOL, RETRACT_MAX_ITER) {
            Ok(y) => y,
            Err(e) => {
                if h_try > min_step {
                    h = h_try / 2.0;
                    continue;
                }
                return Err(abort(&poly, &cumulative, arc, e.to_string()));
            }
        };
        // Near a critical point the RK4 stages straddle it and the step
        // collapses; require both progress in P and a displacement
        // comparable to the step.
        if sign * (p.value(&y) - p.value(&x)) <= 0.0 || (&y - &x).norm() < 0.5 * h_try {
            if h_try <= min_step {
                break Terminal::CriticalPoint;
            }
            h = h_try / 2.0;
            continue;
        }
        if y.norm() > r * (1.0 + 1e-12) {
            break Terminal::LeftBall;
        }
        arc += h_try;
        x = y;
        poly.push(x.clone());
        if cumulative.len() < poly.len() {
            cumulative.push(arc);
        } else {
            *cumulative.last_mut().unwrap() = arc;
        }
    };
    Ok(Trajectory {
        polyline: poly,
        terminal,
        arc_length: arc,
        cumulative,
    })
}
