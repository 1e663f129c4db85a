//! Hyperplanes and polylines.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::Point;

/// The affine hyperplane `aᵀx = b` with unit normal `a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyperplane {
    a: Point,
    b: f64,
}

impl Hyperplane {
    /// Normalizes `(a, b)` so that `‖a‖ = 1`; the zero set is unchanged.
    pub fn new(a: Point, b: f64) -> Result<Self> {
        let norm = a.norm();
        if !(norm > 0.0) || !norm.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument("hyperplane normal must be finite and nonzero".into()));
        }
        Ok(Hyperplane { a: a / norm, b: b / norm })
    }

    /// Builds a hyperplane from an already unit normal without rescaling `b`.
    pub(crate) fn from_unit(a: Point, b: f64) -> Self {
        debug_assert!((a.norm() - 1.0).abs() < 1e-12);
        Hyperplane { a, b }
    }

    pub fn normal(&self) -> &Point {
        &self.a
    }

    pub fn offset(&self) -> f64 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Signed value `aᵀx − b`; zero iff `x` lies on the hyperplane.
    pub fn side(&self, x: &Point) -> Result<f64> {
        check_dim(self.a.len(), x.len())?;
        Ok(self.a.dot(x) - self.b)
    }

    #[inline]
    pub(crate) fn side_unchecked(&self, x: &Point) -> f64 {
        self.a.dot(x) - self.b
    }
}

/// An ordered list of points, optionally closed (last vertex joined to the
/// first).
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Polyline {
    vertices: Vec<Point>,
    closed: bool,
}

impl Polyline {
    /// Consecutive duplicate vertices are dropped.
    pub fn new(vertices: Vec<Point>, closed: bool) -> Result<Self> {
        let mut out: Vec<Point> = Vec::with_capacity(vertices.len());
        for v in vertices {
            if let Some(first) = out.first() {
                check_dim(first.len(), v.len())?;
            }
            if out.last().is_some_and(|last| *last == v) {
                continue;
            }
            out.push(v);
        }
        if closed && out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        Ok(Polyline { vertices: out, closed })
    }

    pub fn empty() -> Self {
        Polyline::default()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.vertices.first().map(|v| v.len())
    }

    /// Appends a vertex unless it equals the current last vertex.
    pub fn push(&mut self, v: Point) {
        if self.vertices.last() != Some(&v) {
            self.vertices.push(v);
        }
    }

    pub fn set_closed(&mut self, closed: bool) {
        self.closed = closed;
    }

    /// Segment endpoints, including the closing segment of a closed polyline.
    pub fn segments(&self) -> impl Iterator<Item = (&Point, &Point)> {
        let n = self.vertices.len();
        let closing = if self.closed && n > 2 { 1 } else { 0 };
        (0..(n.saturating_sub(1) + closing)).map(move |i| (&self.vertices[i], &self.vertices[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).fold(0.0, |s, l| s + l)
    }

    /// Largest vertex norm.
    pub fn extent(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn reversed(&self) -> Polyline {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        Polyline {
            vertices,
            closed: self.closed,
        }
    }

    /// Applies `f` to every vertex.
    pub fn map(&self, f: impl Fn(&Point) -> Point) -> Result<Polyline> {
        Polyline::new(self.vertices.iter().map(f).collect(), self.closed)
    }

    /// Euclidean distance from `p` to the polyline (vertices and segments).
    pub fn distance_to(&self, p: &Point) -> f64 {
        match self.vertices.len() {
            0 => f64::INFINITY,
            1 => (p - &self.vertices[0]).norm(),
            _ => self.segments().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min),
        }
    }
}

pub(crate) fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Convenience constructor for points.
pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn side_examples() {
        let h = Hyperplane::new(point(&[1.0, 0.0]), 0.5).unwrap();
        assert_eq!(h.side(&point(&[0.5, 7.0])).unwrap(), 0.0);
        let h = Hyperplane::new(point(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(h.side(&point(&[1.0, 0.0])).unwrap(), 1.0);
        let s = 0.5_f64.sqrt();
        let h = Hyperplane::new(point(&[s, s]), 1.0).unwrap();
        assert!((h.side(&point(&[1.0, 1.0])).unwrap() - (2.0_f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn normal_is_renormalized_and_zero_rejected() {
        let h = Hyperplane::new(point(&[3.0, 4.0]), 10.0).unwrap();
        assert!((h.normal().norm() - 1.0).abs() < 1e-12);
        assert_eq!(h.offset(), 2.0);
        assert!(Hyperplane::new(point(&[0.0, 0.0]), 1.0).is_err());
    }

    #[test]
    fn polyline_drops_repeats_and_measures() {
        let p = Polyline::new(
            vec![point(&[0.0, 0.0]), point(&[0.0, 0.0]), point(&[3.0, 4.0])],
            false,
        )
        .unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.length(), 5.0);
        let square = Polyline::new(
            vec![point(&[0.0, 0.0]), point(&[1.0, 0.0]), point(&[1.0, 1.0]), point(&[0.0, 1.0])],
            true,
        )
        .unwrap();
        assert_eq!(square.length(), 4.0);
        assert_eq!(square.segments().count(), 4);
    }

    fn rotation(theta: f64, phi: f64) -> DMatrix<f64> {
        let rz = DMatrix::from_row_slice(3, 3, &[theta.cos(), -theta.sin(), 0.0, theta.sin(), theta.cos(), 0.0, 0.0, 0.0, 1.0]);
        let rx = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, phi.cos(), -phi.sin(), 0.0, phi.sin(), phi.cos()]);
        rz * rx
    }

    proptest! {
        #[test]
        fn length_is_rigid_motion_invariant(
            coords in prop::collection::vec(-1.0f64..1.0, 6..30),
            theta in 0.0f64..6.3, phi in 0.0f64..6.3,
            shift in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let verts: Vec<Point> = coords.chunks_exact(3).map(point).collect();
            let line = Polyline::new(verts, false).unwrap();
            let u = rotation(theta, phi);
            let t = point(&shift);
            let moved = line.map(|v| &u * v + &t).unwrap();
            let l0 = line.length();
            prop_assert!((moved.length() - l0).abs() <= 1e-10 * l0.max(1.0));
        }
    }
}
