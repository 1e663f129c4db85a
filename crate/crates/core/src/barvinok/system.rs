//! `S(u)`, `Φ`, `C` and the square system in `(x, λ, μ, u)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::manifold::constraint_gradients;
use crate::{Hyperplane, Point, Quadric, SceneSystem};

/// A point `(λ, μ, u)` of the parameter space `ℝ × ℝ^k × ℝ^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterPoint {
    pub lambda: f64,
    pub mu: DVector<f64>,
    pub u: DVector<f64>,
}

impl ParameterPoint {
    pub fn new(lambda: f64, mu: DVector<f64>, u: DVector<f64>) -> Result<Self> {
        if mu.len() != u.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                found: mu.len(),
            });
        }
        if !(lambda.is_finite() && mu.iter().chain(u.iter()).all(|v| v.is_finite())) {
            return Err(Error::InvalidArgument("parameter point must be finite".into()));
        }
        Ok(ParameterPoint { lambda, mu, u })
    }

    pub fn zero(k: usize) -> Self {
        ParameterPoint {
            lambda: 0.0,
            mu: DVector::zeros(k),
            u: DVector::zeros(k),
        }
    }

    pub fn k(&self) -> usize {
        self.u.len()
    }

    /// Flattened `(λ, μ, u)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let k = self.k();
        DVector::from_fn(2 * k + 1, |i, _| match i {
            0 => self.lambda,
            i if i <= k => self.mu[i - 1],
            i => self.u[i - 1 - k],
        })
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        let k = (v.len() - 1) / 2;
        ParameterPoint {
            lambda: v[0],
            mu: v.rows(1, k).into_owned(),
            u: v.rows(1 + k, k).into_owned(),
        }
    }
}

fn equations(scene: &SceneSystem) -> Vec<&Quadric> {
    scene.equations().collect()
}

fn check_k(scene: &SceneSystem, p: &ParameterPoint) -> Result<()> {
    check_dim(scene.codim(), p.u.len())?;
    check_dim(scene.codim(), p.mu.len())
}

/// `S(u) = H_0 − Σ u_i H_i`.
pub fn s_of_u(scene: &SceneSystem, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let p = scene.require_morse()?;
    check_dim(scene.codim(), u.len())?;
    let mut s = p.hessian();
    for (q, ui) in scene.equations().zip(u.iter()) {
        s -= q.hessian() * *ui;
    }
    Ok(s)
}

/// `Φ = 2 S(u)² − λ H_0 − Σ μ_i H_i`.
pub fn phi(scene: &SceneSystem, p: &ParameterPoint) -> Result<DMatrix<f64>> {
    check_k(scene, p)?;
    let h0 = scene.require_morse()?.hessian();
    let s = s_of_u(scene, &p.u)?;
    let mut out = &s * &s * 2.0 - &h0 * p.lambda;
    for (q, mi) in scene.equations().zip(p.mu.iter()) {
        out -= q.hessian() * *mi;
    }
    Ok(out)
}

/// `C = 2 S(u)(Σ u_i L_i − L_0) + λ L_0 + Σ μ_i L_i`, so that the Lagrange
/// condition on `∇‖∇_M P‖²` reads `Φ x = C`.
pub fn rhs_c(scene: &SceneSystem, p: &ParameterPoint) -> Result<DVector<f64>> {
    check_k(scene, p)?;
    let morse = scene.require_morse()?;
    let s = s_of_u(scene, &p.u)?;
    let l0 = morse.linear();
    let mut w = -l0.clone();
    let mut out = l0 * p.lambda;
    for ((q, ui), mi) in scene.equations().zip(p.u.iter()).zip(p.mu.iter()) {
        w.axpy(*ui, q.linear(), 1.0);
        out.axpy(*mi, q.linear(), 1.0);
    }
    Ok(s * w * 2.0 + out)
}

/// `A(λ, u) = 2 S(u) − (λ/2) I`; the derivative of `Φ` along `H_0 ↦ H_0 + tE`
/// is `E A + A E`.
pub fn a_matrix(scene: &SceneSystem, lambda: f64, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let s = s_of_u(scene, u)?;
    let n = s.nrows();
    Ok(s * 2.0 - DMatrix::identity(n, n) * (lambda / 2.0))
}

/// Stacked residual of `Φx = C` (n), `Q_i(x) = 0` (k),
/// `G(x) u = (⟨∇Q_i, ∇P⟩)` (k) and `aᵀx = b` (1).
pub fn full_residual(scene: &SceneSystem, h: &Hyperplane, x: &Point, p: &ParameterPoint) -> Result<DVector<f64>> {
    check_dim(scene.dim(), x.len())?;
    check_dim(scene.dim(), h.dim())?;
    check_k(scene, p)?;
    let n = scene.dim();
    let k = scene.codim();
    let morse = scene.require_morse()?;
    let mut out = DVector::zeros(n + 2 * k + 1);
    let r1 = phi(scene, p)? * x - rhs_c(scene, p)?;
    out.rows_mut(0, n).copy_from(&r1);
    let grads = constraint_gradients(scene, x);
    let gp = morse.gradient(x);
    for (i, q) in scene.equations().enumerate() {
        out[n + i] = q.value(x);
        let gu: f64 = grads.iter().zip(p.u.iter()).map(|(gj, uj)| grads[i].dot(gj) * uj).sum();
        out[n + k + i] = gu - grads[i].dot(&gp);
    }
    out[n + 2 * k] = h.side_unchecked(x);
    Ok(out)
}

/// Analytic Jacobian of [`full_residual`] with respect to `(x, λ, μ, u)`.
pub fn full_jacobian(scene: &SceneSystem, h: &Hyperplane, x: &Point, p: &ParameterPoint) -> Result<DMatrix<f64>> {
    check_k(scene, p)?;
    let n = scene.dim();
    let k = scene.codim();
    let morse = scene.require_morse()?;
    let eqs = equations(scene);
    let hs: Vec<DMatrix<f64>> = eqs.iter().map(|q| q.hessian()).collect();
    let s = s_of_u(scene, &p.u)?;
    let mut w = -morse.linear().clone();
    for (q, ui) in eqs.iter().zip(p.u.iter()) {
        w.axpy(*ui, q.linear(), 1.0);
    }
    let grads = constraint_gradients(scene, x);
    let gp = morse.gradient(x);
    let dim = n + 2 * k + 1;
    let mut jac = DMatrix::zeros(dim, dim);
    // Φx − C
    jac.view_mut((0, 0), (n, n)).copy_from(&phi(scene, p)?);
    jac.view_mut((0, n), (n, 1)).copy_from(&(-&gp));
    for i in 0..k {
        jac.view_mut((0, n + 1 + i), (n, 1)).copy_from(&(-&grads[i]));
        let hj = &hs[i];
        let col = -(hj * &s + &s * hj) * x * 2.0 + hj * &w * 2.0 - &s * eqs[i].linear() * 2.0;
        jac.view_mut((0, n + 1 + k + i), (n, 1)).copy_from(&col);
    }
    // Q_i
    for i in 0..k {
        for c in 0..n {
            jac[(n + i, c)] = grads[i][c];
        }
    }
    // G u − ⟨∇Q, ∇P⟩
    for i in 0..k {
        let mut dx = -(&hs[i] * &gp) - morse.hess_mul(&grads[i]);
        for j in 0..k {
            dx += (&hs[i] * &grads[j] + &hs[j] * &grads[i]) * p.u[j];
            jac[(n + k + i, n + 1 + k + j)] = grads[i].dot(&grads[j]);
        }
        for c in 0..n {
            jac[(n + k + i, c)] = dx[c];
        }
    }
    // aᵀx − b
    for c in 0..n {
        jac[(n + 2 * k, c)] = h.normal()[c];
    }
    Ok(jac)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::point;
    use crate::rng;

    pub(crate) fn random_scene(n: usize, k: usize, seed: u64) -> SceneSystem {
        let mut g = rng::substream(seed, "test.scene", 0);
        let mut quad = || {
            let h = rng::gaussian_vector(&mut g, n * (n + 1) / 2);
            let l = rng::gaussian_vector(&mut g, n);
            let c = rng::gaussian_vector(&mut g, 1)[0];
            Quadric::from_packed(h.iter().copied().collect(), l, c).unwrap()
        };
        let morse = quad();
        let eqs: Vec<Quadric> = (0..k).map(|_| quad()).collect();
        SceneSystem::equations_only(eqs, Some(morse), 1.0).unwrap()
    }

    fn random_p(k: usize, seed: u64) -> ParameterPoint {
        let mut g = rng::substream(seed, "test.p", 0);
        let v = rng::gaussian_vector(&mut g, 2 * k + 1);
        ParameterPoint::from_vector(&v)
    }

    #[test]
    fn s_and_phi_examples() {
        let s = random_scene(4, 2, 1);
        assert_eq!(s_of_u(&s, &DVector::zeros(2)).unwrap(), s.morse().unwrap().hessian());
        let h0 = s.morse().unwrap().hessian();
        let phi0 = phi(&s, &ParameterPoint::zero(2)).unwrap();
        assert!((phi0 - &h0 * &h0 * 2.0).amax() < 1e-12);

        let id = Quadric::diagonal(&[1.0; 3], DVector::zeros(3), 0.0);
        let scalar = SceneSystem::equations_only(vec![id.clone()], Some(id), 1.0).unwrap();
        let z = s_of_u(&scalar, &DVector::from_vec(vec![1.0])).unwrap();
        assert_eq!(z, DMatrix::zeros(3, 3));
    }

    #[test]
    fn phi_matches_term_by_term_assembly() {
        let s = random_scene(5, 2, 2);
        let p = random_p(2, 3);
        let sm = s_of_u(&s, &p.u).unwrap();
        let eqs: Vec<&Quadric> = s.equations().collect();
        let direct = &sm * &sm * 2.0
            - s.morse().unwrap().hessian() * p.lambda
            - eqs[0].hessian() * p.mu[0]
            - eqs[1].hessian() * p.mu[1];
        assert!((phi(&s, &p).unwrap() - direct).amax() < 1e-12);
        assert_eq!(phi(&s, &p).unwrap(), phi(&s, &p).unwrap().transpose());
    }

    #[test]
    fn rhs_examples() {
        let s = random_scene(3, 1, 4);
        let l0 = s.morse().unwrap().linear().clone();
        let h0 = s.morse().unwrap().hessian();
        let p = ParameterPoint::new(1.0, DVector::zeros(1), DVector::zeros(1)).unwrap();
        let want = -(&h0 * &l0) * 2.0 + &l0;
        assert!((rhs_c(&s, &p).unwrap() - want).amax() < 1e-12);
    }

    #[test]
    fn a_matrix_is_the_derivative_of_phi_in_h0() {
        let s = random_scene(4, 1, 5);
        let p = random_p(1, 6);
        let mut g = rng::substream(7, "test.e", 0);
        let e = Quadric::from_packed(rng::gaussian_vector(&mut g, 10).iter().copied().collect(), DVector::zeros(4), 0.0).unwrap();
        let t = 1e-6;
        let moved = s.with_morse(s.morse().unwrap().plus(&e.scaled(t)).unwrap()).unwrap();
        let slope = (phi(&moved, &p).unwrap() - phi(&s, &p).unwrap()) / t;
        let a = a_matrix(&s, p.lambda, &p.u).unwrap();
        let em = e.hessian();
        let want = &em * &a + &a * &em;
        assert!((slope - &want).amax() < 1e-6 * want.amax().max(1.0));
        let zero = a_matrix(&s, 0.0, &DVector::zeros(1)).unwrap();
        assert!((zero - s.morse().unwrap().hessian() * 2.0).amax() < 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = random_scene(4, 2, 8);
        let h = Hyperplane::new(point(&[0.3, -1.0, 0.2, 0.5]), 0.1).unwrap();
        let x = point(&[0.2, -0.4, 0.1, 0.3]);
        let p = random_p(2, 9);
        let jac = full_jacobian(&s, &h, &x, &p).unwrap();
        let z0 = {
            let mut z = DVector::zeros(4 + 5);
            z.rows_mut(0, 4).copy_from(&x);
            z.rows_mut(4, 5).copy_from(&p.to_vector());
            z
        };
        let f = |z: &DVector<f64>| {
            let x = z.rows(0, 4).into_owned();
            let p = ParameterPoint::from_vector(&z.rows(4, 5).into_owned());
            full_residual(&s, &h, &x, &p).unwrap()
        };
        let eps = 1e-6;
        for c in 0..9 {
            let mut zp = z0.clone();
            let mut zm = z0.clone();
            zp[c] += eps;
            zm[c] -= eps;
            let col = (f(&zp) - f(&zm)) / (2.0 * eps);
            let err = (col - jac.column(c)).amax();
            assert!(err < 1e-6 * jac.amax(), "column {c}: {err}");
        }
    }

    #[test]
    fn full_residual_at_origin_in_closed_form() {
        let s = random_scene(3, 1, 10);
        let h = Hyperplane::new(point(&[0.0, 1.0, 0.0]), 0.25).unwrap();
        let p = ParameterPoint::zero(1);
        let x = DVector::zeros(3);
        let r = full_residual(&s, &h, &x, &p).unwrap();
        let c = rhs_c(&s, &p).unwrap();
        let q = s.equations().next().unwrap();
        assert!((r.rows(0, 3) + c).amax() < 1e-15);
        assert_eq!(r[3], q.constant());
        assert!((r[4] + q.linear().dot(s.morse().unwrap().linear())).abs() < 1e-15);
        assert_eq!(r[5], -0.25);
    }
}
