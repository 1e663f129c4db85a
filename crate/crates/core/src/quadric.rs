//! Polynomials of degree at most two, `Q(x) = ½ xᵀHx + Lᵀx + c`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::Point;

/// Packed index of entry `(i, j)` with `i >= j` in a row-major lower triangle.
#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    debug_assert!(i >= j);
    i * (i + 1) / 2 + j
}

/// A quadric `½ xᵀHx + Lᵀx + c`.
///
/// Only the lower triangle of `H` is stored, so the Hessian is symmetric by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadric {
    n: usize,
    lower: Vec<f64>,
    l: DVector<f64>,
    c: f64,
}

impl Quadric {
    /// Builds a quadric from the lower triangle of `h` (the strict upper
    /// triangle is ignored).
    pub fn new(h: &DMatrix<f64>, l: DVector<f64>, c: f64) -> Result<Self> {
        let n = l.len();
        if n == 0 {
            return Err(Error::InvalidArgument("quadric dimension must be ≥ 1".into()));
        }
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if h.nrows() != n { h.nrows() } else { h.ncols() },
            });
        }
        let mut lower = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                lower.push(h[(i, j)]);
            }
        }
        Self::checked(n, lower, l, c)
    }

    /// Builds a quadric from a packed row-major lower triangle.
    pub fn from_packed(lower: Vec<f64>, l: DVector<f64>, c: f64) -> Result<Self> {
        let n = l.len();
        if n == 0 {
            return Err(Error::InvalidArgument("quadric dimension must be ≥ 1".into()));
        }
        check_dim(n * (n + 1) / 2, lower.len())?;
        Self::checked(n, lower, l, c)
    }

    fn checked(n: usize, lower: Vec<f64>, l: DVector<f64>, c: f64) -> Result<Self> {
        if !(lower.iter().all(|v| v.is_finite()) && l.iter().all(|v| v.is_finite()) && c.is_finite()) {
            return Err(Error::InvalidArgument("quadric entries must be finite".into()));
        }
        Ok(Quadric { n, lower, l, c })
    }

    /// The zero polynomial in `n` variables.
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1);
        Quadric {
            n,
            lower: vec![0.0; n * (n + 1) / 2],
            l: DVector::zeros(n),
            c: 0.0,
        }
    }

    /// `‖x − center‖² − radius²`.
    pub fn sphere(center: &Point, radius: f64) -> Self {
        let n = center.len();
        let mut q = Quadric::zero(n);
        for i in 0..n {
            q.lower[packed_index(i, i)] = 2.0;
        }
        q.l = -2.0 * center;
        q.c = center.norm_squared() - radius * radius;
        q
    }

    /// `Lᵀx + c`.
    pub fn affine(l: DVector<f64>, c: f64) -> Self {
        let mut q = Quadric::zero(l.len());
        q.l = l;
        q.c = c;
        q
    }

    /// `½ xᵀ diag(d) x + Lᵀx + c`.
    pub fn diagonal(d: &[f64], l: DVector<f64>, c: f64) -> Self {
        assert_eq!(d.len(), l.len());
        let mut q = Quadric::affine(l, c);
        for (i, &v) in d.iter().enumerate() {
            q.lower[packed_index(i, i)] = v;
        }
        q
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Entry `H[i][j]`.
    #[inline]
    pub fn h(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.lower[packed_index(i, j)]
        } else {
            self.lower[packed_index(j, i)]
        }
    }

    pub fn packed_lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    /// `Q(x) = ½ xᵀHx + Lᵀx + c`.
    pub fn eval(&self, x: &Point) -> Result<f64> {
        check_dim(self.n, x.len())?;
        Ok(self.value(x))
    }

    /// `∇Q(x) = Hx + L`.
    pub fn grad(&self, x: &Point) -> Result<Point> {
        check_dim(self.n, x.len())?;
        Ok(self.gradient(x))
    }

    /// The (constant) Hessian `H`.
    pub fn hessian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.h(i, j))
    }

    pub(crate) fn value(&self, x: &Point) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let hx = self.hess_mul(x);
        0.5 * x.dot(&hx) + self.l.dot(x) + self.c
    }

    pub(crate) fn gradient(&self, x: &Point) -> Point {
        debug_assert_eq!(x.len(), self.n);
        self.hess_mul(x) + &self.l
    }

    /// `H v`.
    pub fn hess_mul(&self, v: &Point) -> Point {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let row = i * (i + 1) / 2;
            let vi = v[i];
            let mut acc = 0.0;
            for j in 0..i {
                let hij = self.lower[row + j];
                acc += hij * v[j];
                out[j] += hij * vi;
            }
            acc += self.lower[row + i] * vi;
            out[i] += acc;
        }
        out
    }

    /// `‖H‖_max`, the largest absolute Hessian entry.
    pub fn hessian_max_abs(&self) -> f64 {
        self.lower.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// True when every coefficient is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.c == 0.0 && self.l.iter().all(|&v| v == 0.0) && self.lower.iter().all(|&v| v == 0.0)
    }

    /// `s · Q`.
    pub fn scaled(&self, s: f64) -> Quadric {
        Quadric {
            n: self.n,
            lower: self.lower.iter().map(|v| v * s).collect(),
            l: &self.l * s,
            c: self.c * s,
        }
    }

    /// `Q + other`.
    pub fn plus(&self, other: &Quadric) -> Result<Quadric> {
        check_dim(self.n, other.n)?;
        Ok(Quadric {
            n: self.n,
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a + b).collect(),
            l: &self.l + &other.l,
            c: self.c + other.c,
        })
    }

    /// `Q + dc`.
    pub fn shifted(&self, dc: f64) -> Quadric {
        let mut q = self.clone();
        q.c += dc;
        q
    }

    /// `Q(x / ratio)`: `H ↦ H/ratio²`, `L ↦ L/ratio`, `c ↦ c`.
    pub fn homothety(&self, ratio: f64) -> Quadric {
        let r2 = ratio * ratio;
        Quadric {
            n: self.n,
            lower: self.lower.iter().map(|v| v / r2).collect(),
            l: &self.l / ratio,
            c: self.c,
        }
    }

    /// Quadric in the rotated frame `y = Ux`: `(H, L) ↦ (UHUᵀ, UL)`.
    pub fn rotated(&self, u: &DMatrix<f64>) -> Result<Quadric> {
        check_dim(self.n, u.nrows())?;
        let h = u * self.hessian() * u.transpose();
        Quadric::new(&h, u * &self.l, self.c)
    }

    /// Embeds the quadric into `total ≥ n` variables; the new variables
    /// do not appear.
    pub fn embedded(&self, total: usize) -> Quadric {
        assert!(total >= self.n);
        let mut q = Quadric::zero(total);
        for i in 0..self.n {
            for j in 0..=i {
                q.lower[packed_index(i, j)] = self.h(i, j);
            }
            q.l[i] = self.l[i];
        }
        q.c = self.c;
        q
    }
}
