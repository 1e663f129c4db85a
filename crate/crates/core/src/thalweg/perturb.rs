use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold;
use crate::rng;
use crate::{Constraint, Point, Quadric, Role, SceneSystem};

const MAX_ATTEMPTS: usize = 10;
const REGULARITY_SAMPLES: usize = 200;

/// `P̃ = P + ½ xᵀH x + L_0ᵀx`, `Q̃_i = Q_i + L_iᵀx + c_i`; every entry drawn
/// uniformly from `[−scale, scale]`.
#[derive(Debug, Clone, Serialize)]
pub struct Perturbation {
    pub h: DMatrix<f64>,
    /// `L_0, L_1, …, L_k`.
    pub l: Vec<Point>,
    pub c: DVector<f64>,
    pub scale: f64,
    /// Draw index that passed the regularity check.
    pub attempt: usize,
}

fn draw(n: usize, k: usize, scale: f64, seed: u64, attempt: usize) -> Perturbation {
    let mut g = rng::substream(seed, "thalweg.perturb", attempt as u64);
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = rng::symmetric_uniform(&mut g, scale);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let l = (0..=k)
        .map(|_| DVector::from_fn(n, |_, _| rng::symmetric_uniform(&mut g, scale)))
        .collect();
    let c = DVector::from_fn(k, |_, _| rng::symmetric_uniform(&mut g, scale));
    Perturbation {
        h,
        l,
        c,
        scale,
        attempt,
    }
}

fn apply(scene: &SceneSystem, p: &Quadric, d: &Perturbation) -> Result<(SceneSystem, Quadric)> {
    let n = scene.dim();
    let p2 = p.plus(&Quadric::new(&d.h, d.l[0].clone(), 0.0)?)?;
    let mut eq = 0;
    let constraints = scene
        .constraints()
        .iter()
        .map(|c| {
            if c.role != Role::Eq {
                return Ok(c.clone());
            }
            eq += 1;
            let shift = Quadric::affine(d.l[eq].clone(), d.c[eq - 1]);
            debug_assert_eq!(shift.dim(), n);
            Ok(Constraint::new(c.quadric.plus(&shift)?, c.role))
        })
        .collect::<Result<Vec<_>>>()?;
    let s2 = scene.with_constraints(constraints)?;
    let s2 = if scene.morse().is_some() { s2.with_morse(p2.clone())? } else { s2 };
    Ok((s2, p2))
}

/// Perturbs `P` quadratically and the equations affinely. Redraws (up to ten
/// times) while the perturbed scene fails the regularity check.
pub fn perturb(scene: &SceneSystem, p: &Quadric, scale: f64, seed: u64) -> Result<(SceneSystem, Quadric, Perturbation)> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument("perturbation scale must be finite and ≥ 0".into()));
    }
    crate::error::check_dim(scene.dim(), p.dim())?;
    for attempt in 0..MAX_ATTEMPTS {
        let d = draw(scene.dim(), scene.codim(), scale, seed, attempt);
        let (s2, p2) = apply(scene, p, &d)?;
        if scene.codim() == 0 || manifold::regularity_check(&s2, REGULARITY_SAMPLES, rng::derive_seed(seed, "thalweg.perturb.check")).verdict {
            return Ok((s2, p2, d));
        }
    }
    Err(Error::PerturbationIrregular { attempts: MAX_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    #[test]
    fn zero_scale_is_identity_and_hessians_kept() {
        let s = SceneSystem::equations_only(vec![Quadric::sphere(&DVector::zeros(3), 0.9)], None, 1.0).unwrap();
        let p = Quadric::affine(point(&[0.0, 0.0, 1.0]), 0.0);
        let (s0, p0, _) = perturb(&s, &p, 0.0, 1).unwrap();
        assert_eq!(p0, p);
        assert_eq!(s0.constraints()[0].quadric, s.constraints()[0].quadric);

        let (s1, p1, d) = perturb(&s, &p, 1e-2, 1).unwrap();
        assert_eq!(s1.constraints()[0].quadric.hessian(), s.constraints()[0].quadric.hessian());
        assert_ne!(p1, p);
        assert!(d.h.iter().chain(d.c.iter()).chain(d.l.iter().flat_map(|v| v.iter())).all(|v| v.abs() <= 1e-2));
    }
}
