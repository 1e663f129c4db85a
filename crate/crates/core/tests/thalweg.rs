use std::f64::consts::PI;

use nalgebra::DVector;
use qg_core::geometry::point;
use qg_core::manifold;
use qg_core::thalweg::{
    default_seeds, default_tolerance, dimension_check, eigen_residual, perturb, residuals_agree, trace_thalweg,
};
use qg_core::{Quadric, SceneSystem};

fn sphere(n: usize) -> SceneSystem {
    SceneSystem::equations_only(vec![Quadric::sphere(&DVector::zeros(n), 0.9)], None, 1.0).unwrap()
}

fn axial() -> Quadric {
    Quadric::affine(point(&[0.0, 0.0, 1.0]), 0.0)
}

#[test]
fn circle_traces_to_one_closed_branch() {
    let s = sphere(2);
    let p = Quadric::diagonal(&[0.6, -0.4], point(&[0.3, -0.2]), 0.0);
    let seeds = default_seeds(&s, 8, 1).unwrap();
    let t = trace_thalweg(&s, &p, &seeds).unwrap();
    assert_eq!(t.branches.len(), 1, "{:?}", t.warnings);
    assert!(t.branches[0].is_closed());
    let want = 1.8 * PI;
    assert!((t.total_length() - want).abs() < 0.01 * want, "{}", t.total_length());
    assert!(t.max_residual <= t.tolerance);
}

#[test]
fn axial_sphere_reports_degenerate_kernel() {
    let s = sphere(3);
    let seeds = default_seeds(&s, 3, 1).unwrap();
    let t = trace_thalweg(&s, &axial(), &seeds).unwrap();
    assert!(t.warnings.iter().any(|w| w.contains("kernel dimension 2")), "{:?}", t.warnings);
}

#[test]
fn perturbed_sphere_has_closed_one_dimensional_thalweg() {
    let (s, p, _) = perturb(&sphere(3), &axial(), 1e-2, 4).unwrap();
    let seeds = default_seeds(&s, 40, 2).unwrap();
    let t = trace_thalweg(&s, &p, &seeds).unwrap();
    assert!(!t.branches.is_empty());
    let tol = default_tolerance(&s, &p);
    for b in &t.branches {
        for v in b.vertices() {
            assert!(s.equation_residual(v) <= 1e-12);
            assert!(v.norm() <= 1.0);
            assert!(eigen_residual(&s, &p, v).unwrap() <= tol);
        }
    }
    eprintln!("branches {} lengths {:?} warnings {:?}", t.branches.len(), t.lengths(), t.warnings);
}

#[test]
fn box_counting_dimensions() {
    let circle = sphere(2);
    let p2 = Quadric::diagonal(&[0.6, -0.4], point(&[0.3, -0.2]), 0.0);
    let d = dimension_check(&circle, &p2, 0.02, 1).unwrap();
    assert!((d.slope - 1.0).abs() < 0.25, "{d:?}");

    let d = dimension_check(&sphere(3), &axial(), 0.05, 1).unwrap();
    assert!((d.slope - 2.0).abs() < 0.35, "{d:?}");

    let (s, p, _) = perturb(&sphere(3), &axial(), 1e-2, 4).unwrap();
    let d = dimension_check(&s, &p, 0.05, 1).unwrap();
    assert!((d.slope - 1.0).abs() < 0.35, "{d:?}");
}

#[test]
fn residuals_agree_on_ellipsoid_and_thalweg_points() {
    let q = Quadric::diagonal(&[2.0, 3.0, 5.0], DVector::zeros(3), -0.5);
    let s = SceneSystem::equations_only(vec![q], None, 1.0).unwrap();
    let p = Quadric::diagonal(&[0.3, -0.8, 0.5], point(&[0.1, 0.2, -0.3]), 0.0);
    let mut pts = manifold::sample_points(&s, 2000, 9).unwrap();
    let t = trace_thalweg(&s, &p, &pts[..20]).unwrap();
    pts.extend(t.branches.iter().flat_map(|b| b.vertices().iter().cloned()));
    let rep = residuals_agree(&s, &p, &pts, default_tolerance(&s, &p)).unwrap();
    assert!(rep.agrees(), "{:?}", rep.violators);
    assert!(rep.both_zero > 0 && rep.both_nonzero > 0, "{rep:?}");
}
