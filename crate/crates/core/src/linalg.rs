//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::Point;

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values `≤ tol · σ_max` (a zero matrix has full corank).
pub fn corank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return m.nrows().min(m.ncols());
    }
    s.iter().filter(|&&v| v <= tol * smax).count()
}

/// Smallest singular value of the `k×n` matrix whose rows are `rows`;
/// `f64::INFINITY` for `k = 0` (nothing can be rank-deficient).
pub fn sigma_min_of_rows(rows: &[Point]) -> f64 {
    if rows.is_empty() {
        return f64::INFINITY;
    }
    let m = rows_to_matrix(rows);
    singular_values(&m).last().copied().unwrap_or(0.0)
}

pub fn rows_to_matrix(rows: &[Point]) -> DMatrix<f64> {
    let n = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending; column `i`
/// of the returned matrix is the eigenvector for value `i`.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Minimum-norm least-squares solution of `A x = b`, dropping singular values
/// below `rcond · σ_max`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    match svd.solve(b, eps) {
        Ok(x) => x,
        Err(_) => DVector::zeros(a.ncols()),
    }
}

/// Orthonormalizes `vectors` (modified Gram–Schmidt with one
/// reorthogonalization pass), dropping those whose residual falls below
/// `tol` times their original norm.
pub fn orthonormalize(vectors: &[Point], tol: f64) -> Vec<Point> {
    let mut basis: Vec<Point> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let nw = w.norm();
        if nw > tol * norm0 {
            basis.push(w / nw);
        }
    }
    basis
}

/// Removes the components of `v` along the orthonormal vectors `basis`.
pub fn project_out(v: &Point, basis: &[Point]) -> Point {
    let mut w = v.clone();
    for b in basis {
        let c = b.dot(&w);
        w.axpy(-c, b, 1.0);
    }
    w
}

/// Orthonormal basis of the orthogonal complement of `span(rows)` in `R^n`.
pub fn orthogonal_complement(rows: &[Point], n: usize) -> Vec<Point> {
    let span = orthonormalize(rows, 1e-10);
    let target = n - span.len();
    let mut out: Vec<Point> = Vec::with_capacity(target);
    // Candidate coordinate vectors ordered by how much survives projection.
    let mut cands: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let e = DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
            (project_out(&e, &span).norm(), i)
        })
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, i) in cands {
        if out.len() == target {
            break;
        }
        let e = DVector::from_fn(n, |j, _| if i == j { 1.0 } else { 0.0 });
        let mut w = project_out(&project_out(&e, &span), &out);
        w = project_out(&project_out(&w, &span), &out);
        let nw = w.norm();
        if nw > 1e-8 {
            out.push(w / nw);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corank_threshold_semantics() {
        assert_eq!(corank(&DMatrix::identity(4, 4), 1e-10), 0);
        assert_eq!(corank(&DMatrix::zeros(3, 3), 1e-10), 3);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 1e-14]));
        assert_eq!(corank(&d, 1e-10), 1);
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let rows = vec![DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]), DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0])];
        let comp = orthogonal_complement(&rows, 4);
        assert_eq!(comp.len(), 2);
        for (i, a) in comp.iter().enumerate() {
            for r in &rows {
                assert!(a.dot(r).abs() < 1e-12);
            }
            for (j, b) in comp.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.dot(b) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pinv_solves_consistent_rank_deficient_systems() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let x = pinv_solve(&a, &b, 1e-12);
        assert!((&a * &x - &b).norm() < 1e-12);
    }

    #[test]
    fn sym_eigen_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert_eq!(vals, vec![1.0, 3.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }
}
