//! Corank of `Φ` over the parameter space and the `m_A` spectrum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::linalg;
use crate::rng;
use crate::{Quadric, SceneSystem};

use super::system::{phi, s_of_u, ParameterPoint};

/// Default relative singular-value threshold for corank decisions.
pub const CORANK_TOL: f64 = 1e-10;

/// Number of singular values `≤ tol · σ_max`.
pub fn corank(m: &DMatrix<f64>, tol: f64) -> usize {
    linalg::corank(m, tol)
}

/// Corank of a symmetric matrix through its eigenvalues (`|λ|` are its
/// singular values), cheaper than an SVD.
fn sym_corank(m: &DMatrix<f64>, tol: f64) -> usize {
    let vals = m.clone().symmetric_eigenvalues();
    let big = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if big == 0.0 {
        return m.nrows();
    }
    vals.iter().filter(|v| v.abs() <= tol * big).count()
}

/// Scene carrying only Hessians: Gaussian `H_0` (Morse) and `H_1..H_k`, zero
/// linear and constant parts.
pub fn random_h_scene(k: usize, n: usize, seed: u64) -> SceneSystem {
    let mut g = rng::substream(seed, "barvinok.h_tuple", 0);
    let mut quad = || Quadric::from_packed(rng::gaussian_vector(&mut g, n * (n + 1) / 2).iter().copied().collect(), DVector::zeros(n), 0.0)
        .expect("finite");
    let morse = quad();
    let eqs = (0..k).map(|_| quad()).collect();
    SceneSystem::equations_only(eqs, Some(morse), 1.0).expect("valid scene")
}

#[derive(Debug, Clone, Serialize)]
pub struct CorankScan {
    pub max_corank: usize,
    pub witness: ParameterPoint,
    pub samples: usize,
    pub targeted: usize,
}

/// Samples `(λ, μ, u)` uniformly in `[−half_width, half_width]^{2k+1}` and,
/// for every other draw, also at the real generalized eigenvalues `λ` of
/// `(2S(u)² − Σ μ_i H_i, H_0)`, where `Φ` is singular by construction.
/// Returns the largest corank seen.
pub fn corank_scan(scene: &SceneSystem, half_width: f64, samples: usize, seed: u64) -> Result<CorankScan> {
    let k = scene.codim();
    let h0 = scene.require_morse()?.hessian();
    let hs: Vec<DMatrix<f64>> = scene.equations().map(|q| q.hessian()).collect();
    let h0_lu = h0.clone().lu();
    const BATCH: usize = 256;
    let batches = samples.div_ceil(BATCH);
    let results: Vec<(usize, ParameterPoint, usize, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::substream(seed, "barvinok.corank_scan", b as u64);
            let mut best = (0usize, ParameterPoint::zero(k));
            let mut done = 0;
            let mut targeted = 0;
            let quota = BATCH.min(samples - b * BATCH);
            while done < quota {
                let v = DVector::from_fn(2 * k + 1, |_, _| g.random_range(-half_width..=half_width));
                let p = ParameterPoint::from_vector(&v);
                let m = phi(scene, &p).expect("dimensions checked");
                let c = sym_corank(&m, CORANK_TOL);
                if c > best.0 {
                    best = (c, p.clone());
                }
                done += 1;
                if done % 2 == 0 && done < quota {
                    // Targeted: λ at which Φ drops rank for this (μ, u).
                    let s = s_of_u(scene, &p.u).expect("dimensions checked");
                    let mut x = &s * &s * 2.0;
                    for (hi, mi) in hs.iter().zip(p.mu.iter()) {
                        x -= hi * *mi;
                    }
                    let Some(y) = h0_lu.solve(&x) else { continue };
                    for ev in y.complex_eigenvalues().iter() {
                        if done >= quota {
                            break;
                        }
                        if ev.im.abs() > 1e-9 * ev.re.abs().max(1.0) || !ev.re.is_finite() {
                            continue;
                        }
                        let pt = ParameterPoint {
                            lambda: ev.re,
                            ..p.clone()
                        };
                        let c = sym_corank(&phi(scene, &pt).expect("dimensions checked"), CORANK_TOL);
                        if c > best.0 {
                            best = (c, pt);
                        }
                        done += 1;
                        targeted += 1;
                    }
                }
            }
            (best.0, best.1, done, targeted)
        })
        .collect();
    let mut out = CorankScan {
        max_corank: 0,
        witness: ParameterPoint::zero(k),
        samples: 0,
        targeted: 0,
    };
    for (c, p, done, t) in results {
        if c > out.max_corank {
            out.max_corank = c;
            out.witness = p;
        }
        out.samples += done;
        out.targeted += t;
    }
    Ok(out)
}

/// Spectrum of `m_A: S ↦ SA + AS` on symmetric matrices, assembled in the
/// orthonormal basis `{E_ii} ∪ {(E_ij + E_ji)/√2}`; sorted ascending.
pub fn lifted_operator_spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert!(n <= 60, "lifted operator limited to n ≤ 60");
    let basis: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let elem = |(i, j): (usize, usize)| {
        let mut e = DMatrix::zeros(n, n);
        if i == j {
            e[(i, i)] = 1.0;
        } else {
            let v = std::f64::consts::FRAC_1_SQRT_2;
            e[(i, j)] = v;
            e[(j, i)] = v;
        }
        e
    };
    let elems: Vec<DMatrix<f64>> = basis.iter().map(|&b| elem(b)).collect();
    let d = basis.len();
    let mut m = DMatrix::zeros(d, d);
    for (c, eb) in elems.iter().enumerate() {
        let image = eb * a + a * eb;
        for (r, ea) in elems.iter().enumerate() {
            m[(r, c)] = ea.dot(&image);
        }
    }
    let (vals, _) = linalg::sym_eigen(&m);
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_of_diag_1_2() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let s = lifted_operator_spectrum(&a);
        let want = [2.0, 3.0, 4.0];
        assert!(s.iter().zip(want).all(|(x, y)| (x - y).abs() < 1e-12), "{s:?}");
        assert!(lifted_operator_spectrum(&DMatrix::zeros(3, 3)).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn scalar_counterexample_found_by_targeted_draws() {
        let id = Quadric::diagonal(&[1.0; 4], DVector::zeros(4), 0.0);
        let zero = Quadric::zero(4);
        let scene = SceneSystem::equations_only(vec![zero], Some(id), 1.0).unwrap();
        let scan = corank_scan(&scene, 10.0, 200, 1).unwrap();
        assert_eq!(scan.max_corank, 4);
        assert!((scan.witness.lambda - 2.0).abs() < 1e-9);
    }
}
