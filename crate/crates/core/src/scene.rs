//! Scene systems: a list of quadric constraints, an optional Morse quadric and
//! the enclosing ball, plus the JSON scene format.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Point, Quadric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// `Q(x) = 0`
    Eq,
    /// `Q(x) ≥ 0`
    Ge,
    /// `Q(x) > 0`
    Gt,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Eq => "eq",
            Role::Ge => "ge",
            Role::Gt => "gt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub quadric: Quadric,
    pub role: Role,
}

impl Constraint {
    pub fn new(quadric: Quadric, role: Role) -> Self {
        Constraint { quadric, role }
    }
}

/// Bookkeeping attached to a scene produced by slack lifting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftInfo {
    /// Dimension of the base scene.
    pub base_n: usize,
    /// Slack coefficients `a_0, …, a_m` (index 0 is the ball).
    pub a: Vec<f64>,
    /// Name of every lifted coordinate, e.g. `x1`, `y0`.
    pub variable_map: Vec<String>,
}

/// Constraints `Q_i` with roles, an optional Morse quadric `P` and the radius
/// of the enclosing closed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSystem {
    n: usize,
    constraints: Vec<Constraint>,
    morse: Option<Quadric>,
    ball_radius: f64,
    lift: Option<LiftInfo>,
    eq_idx: Vec<usize>,
}

impl SceneSystem {
    pub fn new(n: usize, constraints: Vec<Constraint>, morse: Option<Quadric>, ball_radius: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::schema("n", "dimension must be ≥ 1"));
        }
        if constraints.is_empty() {
            return Err(Error::schema("constraints", "at least one constraint is required"));
        }
        if !(ball_radius > 0.0 && ball_radius.is_finite()) {
            return Err(Error::schema("ball_radius", "must be a positive finite number"));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.quadric.dim() != n {
                return Err(Error::schema(
                    format!("constraints[{i}]"),
                    format!("quadric has dimension {}, scene has n = {n}", c.quadric.dim()),
                ));
            }
        }
        if let Some(p) = &morse {
            if p.dim() != n {
                return Err(Error::schema("morse", format!("quadric has dimension {}, scene has n = {n}", p.dim())));
            }
        }
        let eq_idx = constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Eq)
            .map(|(i, _)| i)
            .collect();
        Ok(SceneSystem {
            n,
            constraints,
            morse,
            ball_radius,
            lift: None,
            eq_idx,
        })
    }

    /// Scene whose constraints are all equations.
    pub fn equations_only(quadrics: Vec<Quadric>, morse: Option<Quadric>, ball_radius: f64) -> Result<Self> {
        let n = quadrics.first().map(Quadric::dim).unwrap_or(0);
        let constraints = quadrics.into_iter().map(|q| Constraint::new(q, Role::Eq)).collect();
        SceneSystem::new(n, constraints, morse, ball_radius)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn morse(&self) -> Option<&Quadric> {
        self.morse.as_ref()
    }

    pub fn require_morse(&self) -> Result<&Quadric> {
        self.morse.as_ref().ok_or(Error::MissingMorse)
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    pub fn lift_info(&self) -> Option<&LiftInfo> {
        self.lift.as_ref()
    }

    pub fn with_lift_info(mut self, lift: LiftInfo) -> Self {
        self.lift = Some(lift);
        self
    }

    pub fn with_morse(&self, morse: Quadric) -> Result<Self> {
        SceneSystem::new(self.n, self.constraints.clone(), Some(morse), self.ball_radius)
            .map(|s| SceneSystem { lift: self.lift.clone(), ..s })
    }

    pub fn without_morse(&self) -> Self {
        SceneSystem {
            morse: None,
            ..self.clone()
        }
    }

    /// Number of equations `k` (the codimension of `M` when regular).
    pub fn codim(&self) -> usize {
        self.eq_idx.len()
    }

    /// The equation quadrics `Q_1, …, Q_k` in declaration order.
    pub fn equations(&self) -> impl ExactSizeIterator<Item = &Quadric> + Clone {
        self.eq_idx.iter().map(move |&i| &self.constraints[i].quadric)
    }

    /// Index into [`constraints`](Self::constraints) of the `i`-th equation.
    pub fn equation_index(&self, i: usize) -> usize {
        self.eq_idx[i]
    }

    pub fn has_inequalities(&self) -> bool {
        self.eq_idx.len() < self.constraints.len()
    }

    pub fn has_strict(&self) -> bool {
        self.constraints.iter().any(|c| c.role == Role::Gt)
    }

    /// `max_i |Q_i(x)|` over the equations.
    pub fn equation_residual(&self, x: &Point) -> f64 {
        self.equations().map(|q| q.value(x).abs()).fold(0.0, f64::max)
    }

    /// True when `x` is in the ball (up to `tol·R`) and satisfies every
    /// inequality (`ge` up to `−tol`, `gt` strictly).
    pub fn inequalities_hold(&self, x: &Point, tol: f64) -> bool {
        if x.norm() > self.ball_radius * (1.0 + tol) {
            return false;
        }
        self.constraints.iter().all(|c| match c.role {
            Role::Eq => true,
            Role::Ge => c.quadric.value(x) >= -tol,
            Role::Gt => c.quadric.value(x) > 0.0,
        })
    }

    /// Replaces the constraint list, keeping `n`, `morse` and the ball.
    pub fn with_constraints(&self, constraints: Vec<Constraint>) -> Result<Self> {
        SceneSystem::new(self.n, constraints, self.morse.clone(), self.ball_radius)
    }

    pub fn with_ball_radius(&self, ball_radius: f64) -> Result<Self> {
        SceneSystem::new(self.n, self.constraints.clone(), self.morse.clone(), ball_radius)
    }
}

// ---------------------------------------------------------------------------
// JSON schema

#[derive(Debug, Serialize, Deserialize)]
struct RawQuadric {
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    l: Vec<f64>,
    #[serde(default)]
    c: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawConstraint {
    role: Role,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    l: Vec<f64>,
    #[serde(default)]
    c: f64,
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct RawScene {
    n: usize,
    #[serde(default = "default_radius")]
    ball_radius: f64,
    constraints: Vec<RawConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    morse: Option<RawQuadric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lift: Option<LiftInfo>,
}

const SYMMETRY_TOL: f64 = 1e-12;

fn quadric_from_raw(path: &str, n: usize, h: &[Vec<f64>], l: &[f64], c: f64) -> Result<Quadric> {
    if l.len() != n {
        return Err(Error::schema(format!("{path}.L"), format!("expected length {n}, found {}", l.len())));
    }
    if h.len() != n {
        return Err(Error::schema(format!("{path}.H"), format!("expected {n} rows, found {}", h.len())));
    }
    for (i, row) in h.iter().enumerate() {
        if row.len() != n {
            return Err(Error::schema(
                format!("{path}.H[{i}]"),
                format!("expected {n} entries, found {}", row.len()),
            ));
        }
    }
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (h[i][j], h[j][i]);
            if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                return Err(Error::schema(
                    format!("{path}.H[{i}][{j}]"),
                    format!("asymmetric entry: {a} vs H[{j}][{i}] = {b}"),
                ));
            }
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| h[i][j]);
    Quadric::new(&m, DVector::from_column_slice(l), c).map_err(|e| Error::schema(path, e.to_string()))
}

fn quadric_to_raw(q: &Quadric) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let n = q.dim();
    let h = (0..n).map(|i| (0..n).map(|j| q.h(i, j)).collect()).collect();
    (h, q.linear().iter().copied().collect(), q.constant())
}

/// Parses a scene from its JSON text.
pub fn parse_scene(text: &str) -> Result<SceneSystem> {
    let raw: RawScene = serde_json::from_str(text).map_err(|e| Error::schema("scene", e.to_string()))?;
    let n = raw.n;
    if n == 0 {
        return Err(Error::schema("n", "dimension must be ≥ 1"));
    }
    let constraints = raw
        .constraints
        .iter()
        .enumerate()
        .map(|(i, rc)| {
            quadric_from_raw(&format!("constraints[{i}]"), n, &rc.h, &rc.l, rc.c).map(|q| Constraint::new(q, rc.role))
        })
        .collect::<Result<Vec<_>>>()?;
    let morse = raw
        .morse
        .as_ref()
        .map(|m| quadric_from_raw("morse", n, &m.h, &m.l, m.c))
        .transpose()?;
    let mut scene = SceneSystem::new(n, constraints, morse, raw.ball_radius)?;
    if let Some(lift) = raw.lift {
        scene = scene.with_lift_info(lift);
    }
    Ok(scene)
}

/// Serializes a scene to canonical pretty-printed JSON.
pub fn serialize_scene(scene: &SceneSystem) -> String {
    let raw = RawScene {
        n: scene.n,
        ball_radius: scene.ball_radius,
        constraints: scene
            .constraints
            .iter()
            .map(|c| {
                let (h, l, cc) = quadric_to_raw(&c.quadric);
                RawConstraint { role: c.role, h, l, c: cc }
            })
            .collect(),
        morse: scene.morse.as_ref().map(|q| {
            let (h, l, c) = quadric_to_raw(q);
            RawQuadric { h, l, c }
        }),
        lift: scene.lift.clone(),
    };
    serde_json::to_string_pretty(&raw).expect("scene serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"n": 2, "constraints": [{"role": "eq", "H": [[2,0],[0,2]], "L": [0,0], "c": -0.81}]}"#;

    #[test]
    fn minimal_scene_round_trips() {
        let s = parse_scene(MINIMAL).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.ball_radius(), 1.0);
        assert_eq!(s.codim(), 1);
        let again = parse_scene(&serialize_scene(&s)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn strict_role_without_morse() {
        let text = r#"{"n": 2, "ball_radius": 1.0,
            "constraints": [{"role": "gt", "H": [[0,0],[0,0]], "L": [1,0], "c": 0}]}"#;
        let s = parse_scene(text).unwrap();
        assert!(s.morse().is_none());
        assert_eq!(s.constraints()[0].role, Role::Gt);
        assert_eq!(s.codim(), 0);
    }

    #[test]
    fn bad_linear_length_names_the_constraint() {
        let text = r#"{"n": 2, "constraints": [
            {"role": "eq", "H": [[2,0],[0,2]], "L": [0,0], "c": -1},
            {"role": "ge", "H": [[0,0],[0,0]], "L": [1,0,0], "c": 0}]}"#;
        let err = parse_scene(text).unwrap_err().to_string();
        assert!(err.contains("constraints[1].L"), "{err}");
    }

    #[test]
    fn asymmetric_hessian_rejected() {
        let text = r#"{"n": 2, "constraints": [{"role": "eq", "H": [[2,1],[0,2]], "L": [0,0], "c": -1}]}"#;
        let err = parse_scene(text).unwrap_err().to_string();
        assert!(err.contains("constraints[0].H[1][0]"), "{err}");
    }

    #[test]
    fn morse_dimension_checked_and_schema_errors_reported() {
        let text = r#"{"n": 2, "constraints": [{"role": "eq", "H": [[2,0],[0,2]], "L": [0,0]}],
            "morse": {"H": [[1]], "L": [1], "c": 0}}"#;
        let err = parse_scene(text).unwrap_err().to_string();
        assert!(err.contains("morse.L"), "{err}");
        assert!(parse_scene(r#"{"n": 2}"#).is_err());
        assert!(parse_scene(r#"{"n": 2, "constraints": []}"#).is_err());
        assert!(parse_scene(r#"{"n": 2, "constraints": [{"role": "lt", "H": [[0,0],[0,0]], "L": [0,0]}]}"#).is_err());
    }

    #[test]
    fn whitespace_does_not_matter() {
        let compact: String = MINIMAL.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(parse_scene(&compact).unwrap(), parse_scene(MINIMAL).unwrap());
    }
}
