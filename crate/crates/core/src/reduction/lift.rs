use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold;
use crate::scene::LiftInfo;
use crate::{Constraint, Point, Polyline, Quadric, Role, SceneSystem};

use super::trust::max_abs_on_ball;

#[derive(Debug, Clone, Serialize)]
pub struct LiftedScene {
    #[serde(skip)]
    pub base: SceneSystem,
    #[serde(skip)]
    pub lifted: SceneSystem,
    /// Slack coefficients `a_0` (ball) and `a_1, …, a_m` (inequalities).
    pub a: Vec<f64>,
    /// `max |Q_i|` over the ball, same order as `a`.
    pub max_abs: Vec<f64>,
    /// Name of every lifted coordinate: `x1..xn`, then `y0..ym`.
    pub variable_map: Vec<String>,
}

impl LiftedScene {
    /// Lifts a base-feasible point: `y_i = √(a_i Q_i(x))`.
    pub fn lift_point(&self, x: &Point) -> Option<Point> {
        let n = self.base.dim();
        let r = self.base.ball_radius();
        let mut vals = vec![r * r - x.norm_squared()];
        vals.extend(self.base.constraints().iter().filter(|c| c.role == Role::Ge).map(|c| c.quadric.value(x)));
        let mut out = Point::zeros(self.lifted.dim());
        out.rows_mut(0, n).copy_from(x);
        for (i, (v, a)) in vals.iter().zip(&self.a).enumerate() {
            if *v < 0.0 {
                return None;
            }
            out[n + i] = (a * v).sqrt();
        }
        Some(out)
    }
}

/// `y_i² − a_i Q_i(x)` as a quadric in the lifted variables.
fn slack_equation(q: &Quadric, a: f64, n: usize, slot: usize, total: usize) -> Result<Quadric> {
    let mut h = DMatrix::zeros(total, total);
    h.view_mut((0, 0), (n, n)).copy_from(&(q.hessian() * -a));
    h[(slot, slot)] = 2.0;
    let mut l = Point::zeros(total);
    l.rows_mut(0, n).copy_from(&(q.linear() * -a));
    Quadric::new(&h, l, -a * q.constant())
}

/// Replaces the ball and each `Q_i ≥ 0` by `y_i² = a_i Q_i(x)` with
/// `a_i = 1 / (2(m+1) max_B |Q_i|)`. Equations pass through unchanged.
/// The lifted ball has radius `2R`, enough since `‖x‖ ≤ R` and
/// `Σ y_i² ≤ 1/2` on the lifted set.
pub fn slack_lift(scene: &SceneSystem) -> Result<LiftedScene> {
    if scene.has_strict() {
        return Err(Error::InvalidArgument("strict inequalities must be replaced before lifting".into()));
    }
    let n = scene.dim();
    let r = scene.ball_radius();
    let ineq: Vec<&Quadric> = scene.constraints().iter().filter(|c| c.role == Role::Ge).map(|c| &c.quadric).collect();
    if ineq.is_empty() {
        return Err(Error::InvalidArgument("nothing to lift: scene has no inequalities".into()));
    }
    let m = ineq.len();
    let ball = Quadric::sphere(&Point::zeros(n), r).scaled(-1.0);
    let mut sources = vec![&ball];
    sources.extend(ineq.iter().copied());
    let total = n + m + 1;
    let mut max_abs = Vec::with_capacity(m + 1);
    let mut a = Vec::with_capacity(m + 1);
    let mut constraints: Vec<Constraint> = scene
        .constraints()
        .iter()
        .filter(|c| c.role == Role::Eq)
        .map(|c| Constraint::new(c.quadric.embedded(total), Role::Eq))
        .collect();
    for (i, q) in sources.iter().enumerate() {
        let mx = max_abs_on_ball(q, r);
        if !(mx > 0.0) {
            // Index among the scene's inequalities; 0 is the ball.
            return Err(Error::DegenerateConstraint { index: i });
        }
        let ai = 1.0 / (2.0 * (m + 1) as f64 * mx);
        constraints.push(Constraint::new(slack_equation(q, ai, n, n + i, total)?, Role::Eq));
        max_abs.push(mx);
        a.push(ai);
    }
    let mut variable_map: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    variable_map.extend((0..=m).map(|i| format!("y{i}")));
    let morse = scene.morse().map(|p| p.embedded(total));
    let lifted = SceneSystem::new(total, constraints, morse, 2.0 * r)?.with_lift_info(LiftInfo {
        base_n: n,
        a: a.clone(),
        variable_map: variable_map.clone(),
    });
    let out = LiftedScene {
        base: scene.clone(),
        lifted,
        a,
        max_abs,
        variable_map,
    };
    check_containment(&out)?;
    Ok(out)
}

/// Lifted points must satisfy `‖x‖ ≤ R` and `y_i² ≤ 1/(m+1)`.
fn check_containment(l: &LiftedScene) -> Result<()> {
    let n = l.base.dim();
    let m1 = l.a.len();
    let Ok(pts) = manifold::sample_points(&l.lifted, 64, 0) else { return Ok(()) };
    for y in pts {
        let xn = y.rows(0, n).norm();
        let ymax = (n..n + m1).map(|i| y[i] * y[i]).fold(0.0, f64::max);
        if xn > l.base.ball_radius() * (1.0 + 1e-9) || ymax > 1.0 / m1 as f64 + 1e-12 {
            return Err(Error::Inconclusive(format!("lifted point outside the containment region (|x| = {xn}, max y² = {ymax})")));
        }
    }
    Ok(())
}

/// Drops the slack coordinates. The result is never longer than the input.
pub fn project_down(lifted: &Polyline, base_n: usize) -> Result<Polyline> {
    let out = lifted.map(|v| v.rows(0, base_n).into_owned())?;
    debug_assert!(out.length() <= lifted.length() + 1e-12);
    Ok(out)
}

/// `x ↦ ratio · x` applied to the scene: `Q ↦ Q(·/ratio)`, `R ↦ ratio · R`.
pub fn homothety_scene(scene: &SceneSystem, ratio: f64) -> Result<SceneSystem> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument("homothety ratio must be positive".into()));
    }
    let constraints = scene
        .constraints()
        .iter()
        .map(|c| Constraint::new(c.quadric.homothety(ratio), c.role))
        .collect();
    SceneSystem::new(scene.dim(), constraints, scene.morse().map(|p| p.homothety(ratio)), scene.ball_radius() * ratio)
}

pub fn homothety_polyline(poly: &Polyline, ratio: f64) -> Result<Polyline> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument("homothety ratio must be positive".into()));
    }
    poly.map(|v| v * ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    fn half_disk() -> SceneSystem {
        let q = Quadric::affine(point(&[1.0, 0.0]), 0.0);
        SceneSystem::new(2, vec![Constraint::new(q, Role::Ge)], None, 1.0).unwrap()
    }

    #[test]
    fn half_disk_lift_shape() {
        let l = slack_lift(&half_disk()).unwrap();
        assert_eq!(l.lifted.dim(), 4);
        assert_eq!(l.lifted.codim(), 2);
        assert!((l.a[1] - 0.25).abs() < 1e-12);
        assert!((l.a[0] - 0.25).abs() < 1e-12);
        assert_eq!(l.variable_map, ["x1", "x2", "y0", "y1"]);
        let x = point(&[0.3, -0.4]);
        let y = l.lift_point(&x).unwrap();
        assert!(l.lifted.equation_residual(&y) < 1e-15);
        assert!(l.lift_point(&point(&[-0.1, 0.0])).is_none());
    }

    #[test]
    fn inactive_inequality_keeps_slack_positive() {
        let q = Quadric::diagonal(&[2.0, 2.0], Point::zeros(2), 1.0);
        let s = SceneSystem::new(2, vec![Constraint::new(q, Role::Ge)], None, 1.0).unwrap();
        let l = slack_lift(&s).unwrap();
        for y in manifold::sample_points(&l.lifted, 100, 1).unwrap() {
            assert!(y[3].abs() > 0.1);
        }
    }

    #[test]
    fn equations_only_has_nothing_to_lift() {
        let s = SceneSystem::equations_only(vec![Quadric::sphere(&Point::zeros(2), 0.9)], None, 1.0).unwrap();
        assert!(matches!(slack_lift(&s), Err(Error::InvalidArgument(m)) if m.contains("nothing to lift")));
    }

    #[test]
    fn projection_and_homothety_lengths() {
        let flat = Polyline::new(vec![point(&[0.0, 0.0, 0.5]), point(&[1.0, 0.0, 0.5])], false).unwrap();
        assert!((project_down(&flat, 2).unwrap().length() - 1.0).abs() < 1e-15);
        let helix = Polyline::new(
            (0..50).map(|i| {
                let t = i as f64 * 0.2;
                point(&[t.cos(), t.sin(), 0.1 * t])
            }).collect(),
            false,
        )
        .unwrap();
        assert!(project_down(&helix, 2).unwrap().length() < helix.length());
        let single = Polyline::new(vec![point(&[1.0, 2.0, 3.0])], false).unwrap();
        assert_eq!(project_down(&single, 2).unwrap().vertices(), &[point(&[1.0, 2.0])]);
        assert!((homothety_polyline(&helix, 0.5).unwrap().length() - 0.5 * helix.length()).abs() < 1e-12);

        let s = SceneSystem::equations_only(vec![Quadric::sphere(&Point::zeros(3), 1.0)], None, 1.0).unwrap();
        let half = homothety_scene(&s, 0.5).unwrap();
        assert!(half.equation_residual(&point(&[0.5, 0.0, 0.0])) < 1e-15);
        assert_eq!(half.ball_radius(), 0.5);
        assert_eq!(homothety_scene(&s, 1.0).unwrap().constraints()[0].quadric, s.constraints()[0].quadric);
    }
}
