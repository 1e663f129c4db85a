//! Pivot patterns `δ = (s, I, J)`: regions of parameter space where `Φ`
//! minus rows `I` and columns `J` is invertible and `[Φ | C]` has rank `n − s`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::{Hyperplane, Point, SceneSystem};

use super::corank::CORANK_TOL;
use super::system::{phi, rhs_c, ParameterPoint};

/// `I` and `J` are the removed rows and columns (0-based, sorted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PivotPattern {
    pub s: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl PivotPattern {
    pub fn new(n: usize, mut rows: Vec<usize>, mut cols: Vec<usize>) -> Result<Self> {
        rows.sort_unstable();
        cols.sort_unstable();
        rows.dedup();
        cols.dedup();
        if rows.len() != cols.len() {
            return Err(Error::InvalidArgument(format!("|I| = {} but |J| = {}", rows.len(), cols.len())));
        }
        if rows.iter().chain(cols.iter()).any(|&i| i >= n) {
            return Err(Error::InvalidArgument(format!("pattern index out of range for n = {n}")));
        }
        Ok(PivotPattern { s: rows.len(), rows, cols })
    }

    /// The trivial pattern `(0, ∅, ∅)`.
    pub fn full() -> Self {
        PivotPattern {
            s: 0,
            rows: vec![],
            cols: vec![],
        }
    }

    fn kept(removed: &[usize], n: usize) -> Vec<usize> {
        (0..n).filter(|i| !removed.contains(i)).collect()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.rows.len() != self.s || self.cols.len() != self.s || self.rows.iter().chain(&self.cols).any(|&i| i >= n) {
            return Err(Error::InvalidArgument("malformed pivot pattern".into()));
        }
        Ok(())
    }
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn augmented(phi: &DMatrix<f64>, c: &DVector<f64>) -> DMatrix<f64> {
    let n = phi.nrows();
    let mut a = DMatrix::zeros(n, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(phi);
    a.set_column(n, c);
    a
}

/// Pattern read off a matrix: `s` is its corank, and the kept rows and
/// columns are the first `n − s` pivots of greedy full-pivot elimination.
pub fn detect_pattern(m: &DMatrix<f64>, tol: f64) -> PivotPattern {
    let n = m.nrows();
    let s = linalg::corank(m, tol);
    let mut a = m.clone();
    let mut free_rows: Vec<usize> = (0..n).collect();
    let mut free_cols: Vec<usize> = (0..n).collect();
    for _ in 0..n - s {
        let (mut bi, mut bj, mut best) = (0, 0, -1.0);
        for (ii, &i) in free_rows.iter().enumerate() {
            for (jj, &j) in free_cols.iter().enumerate() {
                if a[(i, j)].abs() > best {
                    (bi, bj, best) = (ii, jj, a[(i, j)].abs());
                }
            }
        }
        let (pi, pj) = (free_rows.remove(bi), free_cols.remove(bj));
        let piv = a[(pi, pj)];
        for &i in &free_rows {
            let f = a[(i, pj)] / piv;
            for j in 0..n {
                a[(i, j)] -= f * a[(pi, j)];
            }
        }
    }
    PivotPattern {
        s,
        rows: free_rows,
        cols: free_cols,
    }
}

/// True iff `|det Φ_{I^c, J^c}| > tol · σ_max(Φ)^{n−s}` and `[Φ | C]` has
/// corank `s` (exactly `s` singular values below `tol · σ_max`).
pub fn pattern_membership(scene: &SceneSystem, p: &ParameterPoint, delta: &PivotPattern) -> Result<bool> {
    let n = scene.dim();
    delta.check(n)?;
    let m = phi(scene, p)?;
    let c = rhs_c(scene, p)?;
    let sv = linalg::singular_values(&m);
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(false);
    }
    let keep_r = PivotPattern::kept(&delta.rows, n);
    let keep_c = PivotPattern::kept(&delta.cols, n);
    let det = if keep_r.is_empty() {
        1.0
    } else {
        submatrix(&m, &keep_r, &keep_c).determinant()
    };
    if !(det.abs() > CORANK_TOL * smax.powi((n - delta.s) as i32)) {
        return Ok(false);
    }
    // Φ̂ is n × (n+1); its rank is n minus the count of vanishing singular values.
    let aug = linalg::singular_values(&augmented(&m, &c));
    let amax = aug.first().copied().unwrap_or(0.0);
    let small = aug.iter().filter(|&&v| v <= CORANK_TOL * amax).count();
    Ok(small == delta.s)
}

/// Fills `x_J = xj` and solves rows `∉ I` of `Φ x = C` for the remaining
/// coordinates by LU with partial pivoting.
pub fn solve_pattern(scene: &SceneSystem, p: &ParameterPoint, delta: &PivotPattern, xj: &DVector<f64>) -> Result<Point> {
    let n = scene.dim();
    check_dim(delta.s, xj.len())?;
    if !pattern_membership(scene, p, delta)? {
        return Err(Error::PatternNotMember);
    }
    let m = phi(scene, p)?;
    let c = rhs_c(scene, p)?;
    let keep_r = PivotPattern::kept(&delta.rows, n);
    let keep_c = PivotPattern::kept(&delta.cols, n);
    let mut x = DVector::zeros(n);
    for (v, &j) in xj.iter().zip(&delta.cols) {
        x[j] = *v;
    }
    if keep_r.is_empty() {
        return Ok(x);
    }
    let mut rhs = DVector::from_fn(keep_r.len(), |i, _| c[keep_r[i]]);
    for (i, &r) in keep_r.iter().enumerate() {
        for &j in &delta.cols {
            rhs[i] -= m[(r, j)] * x[j];
        }
    }
    let sol = submatrix(&m, &keep_r, &keep_c)
        .lu()
        .solve(&rhs)
        .ok_or(Error::PatternNotMember)?;
    for (v, &j) in sol.iter().zip(&keep_c) {
        x[j] = *v;
    }
    Ok(x)
}

/// Residual of the reduced system at `(p, x_J)`: `Q_i(x)` (k),
/// `G(x)u − ⟨∇Q_i, ∇P⟩` (k), `aᵀx − b`, and the rank condition written as
/// the `s`-th smallest singular value of `[Φ | C]` (zero when `s = 0`, where
/// the rank condition is implied by invertibility).
pub fn reduced_residual(
    scene: &SceneSystem,
    h: &Hyperplane,
    delta: &PivotPattern,
    p: &ParameterPoint,
    xj: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = scene.dim();
    let k = scene.codim();
    let x = solve_pattern(scene, p, delta, xj)?;
    let full = super::system::full_residual(scene, h, &x, p)?;
    let mut out = DVector::zeros(2 * k + 2);
    out.rows_mut(0, 2 * k + 1).copy_from(&full.rows(n, 2 * k + 1));
    if delta.s > 0 {
        let sv = linalg::singular_values(&augmented(&phi(scene, p)?, &rhs_c(scene, p)?));
        out[2 * k + 1] = sv[sv.len() - delta.s];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Quadric;

    fn scalar_scene(n: usize) -> SceneSystem {
        let id = Quadric::diagonal(&vec![1.0; n], DVector::zeros(n), 0.0);
        SceneSystem::equations_only(vec![Quadric::zero(n)], Some(id), 1.0).unwrap()
    }

    #[test]
    fn regular_phi_uses_trivial_pattern() {
        let s = super::super::system::tests::random_scene(4, 1, 3);
        let p = ParameterPoint::new(0.7, DVector::from_vec(vec![0.2]), DVector::from_vec(vec![-0.4])).unwrap();
        assert!(pattern_membership(&s, &p, &PivotPattern::full()).unwrap());
        assert_eq!(detect_pattern(&phi(&s, &p).unwrap(), CORANK_TOL), PivotPattern::full());
        let x = solve_pattern(&s, &p, &PivotPattern::full(), &DVector::zeros(0)).unwrap();
        let want = phi(&s, &p).unwrap().lu().solve(&rhs_c(&s, &p).unwrap()).unwrap();
        assert!((x - want).norm() < 1e-10);
    }

    #[test]
    fn singular_phi_refused() {
        let s = scalar_scene(3);
        let p = ParameterPoint::new(2.0, DVector::zeros(1), DVector::zeros(1)).unwrap();
        assert!(!pattern_membership(&s, &p, &PivotPattern::full()).unwrap());
        assert!(matches!(
            solve_pattern(&s, &p, &PivotPattern::full(), &DVector::zeros(0)),
            Err(Error::PatternNotMember)
        ));
    }

    #[test]
    fn rank_deficient_compatible_system() {
        // H_0 = diag(1, 2, 3), H_1 = 0, L = 0: Φ = diag(2 − λ, 8 − 2λ, 18 − 3λ)
        // is singular in its first entry at λ = 2 and C = 0 is compatible.
        let h0 = Quadric::diagonal(&[1.0, 2.0, 3.0], DVector::zeros(3), 0.0);
        let s = SceneSystem::equations_only(vec![Quadric::zero(3)], Some(h0), 1.0).unwrap();
        let p = ParameterPoint::new(2.0, DVector::zeros(1), DVector::zeros(1)).unwrap();
        let delta = detect_pattern(&phi(&s, &p).unwrap(), CORANK_TOL);
        assert_eq!(delta, PivotPattern::new(3, vec![0], vec![0]).unwrap());
        assert!(pattern_membership(&s, &p, &delta).unwrap());
        assert!(!pattern_membership(&s, &p, &PivotPattern::full()).unwrap());
        let x = solve_pattern(&s, &p, &delta, &DVector::from_vec(vec![0.5])).unwrap();
        assert!((x - DVector::from_vec(vec![0.5, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn reduced_residual_shape_and_off_solution() {
        let s = super::super::system::tests::random_scene(2, 1, 5);
        let h = Hyperplane::new(DVector::from_vec(vec![1.0, 0.3]), 0.1).unwrap();
        let p = ParameterPoint::new(0.3, DVector::from_vec(vec![0.1]), DVector::from_vec(vec![0.2])).unwrap();
        let r = reduced_residual(&s, &h, &PivotPattern::full(), &p, &DVector::zeros(0)).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.norm() > 1e-6);
    }

    #[test]
    fn pattern_validation() {
        assert!(PivotPattern::new(3, vec![0], vec![0, 1]).is_err());
        assert!(PivotPattern::new(3, vec![3], vec![0]).is_err());
        assert_eq!(PivotPattern::new(3, vec![2, 0], vec![1, 0]).unwrap().rows, vec![0, 2]);
    }
}
