use std::f64::consts::PI;

use nalgebra::DVector;
use qg_core::flow::{
    graph_geodesic_diameter, integrate_trajectory, trajectory_diameter_estimate, Direction, EstimateOptions, FlowOptions,
    Terminal,
};
use qg_core::geometry::point;
use qg_core::{Error, Quadric, SceneSystem};

fn sphere(n: usize, r: f64) -> SceneSystem {
    SceneSystem::equations_only(vec![Quadric::sphere(&DVector::zeros(n), r)], None, 1.0).unwrap()
}

fn two_circles() -> SceneSystem {
    // Unit-ball sphere of radius 0.9 cut by x3 = ±0.4.
    let s = Quadric::sphere(&DVector::zeros(3), 0.9);
    let planes = Quadric::diagonal(&[0.0, 0.0, 2.0], DVector::zeros(3), -0.16);
    SceneSystem::equations_only(vec![s, planes], None, 1.0).unwrap()
}

#[test]
fn quarter_great_circle_ascent_and_descent() {
    let s = sphere(3, 0.9);
    let p = Quadric::affine(point(&[0.0, 0.0, 1.0]), 0.0);
    let x0 = point(&[0.9, 0.0, 0.0]);
    let up = integrate_trajectory(&s, &p, &x0, Direction::Ascent, 10.0, &FlowOptions::default()).unwrap();
    assert_eq!(up.terminal, Terminal::CriticalPoint);
    let end = up.polyline.vertices().last().unwrap();
    assert!((end - point(&[0.0, 0.0, 0.9])).norm() < 1e-4);
    let quarter = 0.9 * PI / 2.0;
    assert!((up.arc_length - quarter).abs() < 0.01 * quarter, "{}", up.arc_length);
    assert!(up.polyline.length() <= up.arc_length + 1e-12);
    for w in up.polyline.vertices().windows(2) {
        assert!(p.eval(&w[1]).unwrap() > p.eval(&w[0]).unwrap());
    }
    assert!(up.polyline.vertices().iter().all(|v| s.equation_residual(v) <= 1e-12));

    let down = integrate_trajectory(&s, &p, &x0, Direction::Descent, 10.0, &FlowOptions::default()).unwrap();
    let end = down.polyline.vertices().last().unwrap();
    assert!((end - point(&[0.0, 0.0, -0.9])).norm() < 1e-4);
}

#[test]
fn trajectory_from_critical_point_is_empty() {
    let s = sphere(3, 0.9);
    let p = Quadric::affine(point(&[0.0, 0.0, 1.0]), 0.0);
    let t = integrate_trajectory(&s, &p, &point(&[0.0, 0.0, 0.9]), Direction::Ascent, 10.0, &FlowOptions::default()).unwrap();
    assert_eq!(t.terminal, Terminal::CriticalPoint);
    assert_eq!(t.arc_length, 0.0);
    assert_eq!(t.polyline.len(), 1);
}

#[test]
fn sphere_trajectory_estimate_bounds_antipodal_distance() {
    let s = sphere(3, 0.9);
    let p = Quadric::diagonal(&[0.1, 0.0, 0.0], point(&[0.0, 0.0, 1.0]), 0.0);
    let x = point(&[0.9, 0.0, 0.0]);
    let y = point(&[-0.9, 0.0, 0.0]);
    let est = trajectory_diameter_estimate(&s, &p, &x, &y, &EstimateOptions::default()).unwrap();
    assert!(est.estimate >= 0.9 * PI && est.estimate <= 0.9 * PI * 1.05, "{}", est.estimate);
    assert!(est.estimate >= (&x - &y).norm());
    let same = trajectory_diameter_estimate(&s, &p, &x, &x, &EstimateOptions::default()).unwrap();
    assert!(same.estimate <= 1e-3 * 0.9);
}

#[test]
fn trajectory_estimate_rejects_other_component_and_multiple_maxima() {
    let s = two_circles();
    let p = Quadric::affine(point(&[1.0, 0.3, 0.0]), 0.0);
    let rho = (0.81f64 - 0.16).sqrt();
    let a = point(&[0.0, rho, 0.4]);
    let b = point(&[0.0, rho, -0.4]);
    let err = trajectory_diameter_estimate(&s, &p, &a, &b, &EstimateOptions::default()).unwrap_err();
    assert!(matches!(err, Error::DifferentComponents), "{err}");

    let circle = sphere(2, 0.9);
    let multi = Quadric::diagonal(&[2.0, 0.0], point(&[0.1, 0.0]), 0.0);
    let err = trajectory_diameter_estimate(&circle, &multi, &point(&[0.0, 0.9]), &point(&[0.0, -0.9]), &EstimateOptions::default())
        .unwrap_err();
    assert!(matches!(err, Error::MultipleMaxima { .. }), "{err}");
}

#[test]
fn graph_diameter_of_circle_and_sphere() {
    let c = sphere(2, 0.9);
    let d = graph_geodesic_diameter(&c, 2000, 12, 1).unwrap();
    assert_eq!(d.components.len(), 1);
    let want = 0.9 * PI;
    assert!((d.total() - want).abs() < 0.02 * want, "{}", d.total());

    let s = sphere(3, 0.9);
    let d = graph_geodesic_diameter(&s, 4000, 12, 1).unwrap();
    assert_eq!(d.components.len(), 1);
    assert!((d.total() - want).abs() < 0.03 * want, "{}", d.total());
}

#[test]
fn graph_diameter_two_components() {
    let d = graph_geodesic_diameter(&two_circles(), 1000, 10, 2).unwrap();
    assert_eq!(d.components.len(), 2);
    let r = (0.81f64 - 0.16).sqrt();
    for c in &d.components {
        assert!((c.diameter - PI * r).abs() < 0.02 * PI * r, "{}", c.diameter);
    }
}
