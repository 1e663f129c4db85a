use std::f64::consts::PI;

use qg_core::crofton::estimate_length;
use qg_core::geometry::point;
use qg_core::reduction::homothety_polyline;
use qg_core::Polyline;

fn regular_polygon(m: usize, r: f64) -> Polyline {
    let v = (0..m)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m as f64;
            point(&[r * t.cos(), r * t.sin()])
        })
        .collect();
    Polyline::new(v, true).unwrap()
}

#[test]
fn polygon_perimeter() {
    let p = regular_polygon(64, 0.5);
    let exact = 64.0 * 2.0 * 0.5 * (PI / 64.0).sin();
    let est = estimate_length(std::slice::from_ref(&p), 400_000, 1.0, 1).unwrap();
    assert!((est.length - exact).abs() <= 4.0 * est.stderr, "{} vs {exact}", est.length);
}

#[test]
fn two_disjoint_segments_add_up() {
    let a = Polyline::new(vec![point(&[-0.8, 0.5]), point(&[-0.2, 0.5])], false).unwrap();
    let b = Polyline::new(vec![point(&[0.1, -0.6]), point(&[0.1, 0.3])], false).unwrap();
    let est = estimate_length(&[a, b], 400_000, 1.0, 2).unwrap();
    assert!((est.length - 1.5).abs() <= 4.0 * est.stderr, "{}", est.length);
}

#[test]
fn independent_of_thread_count() {
    let p = regular_polygon(200, 0.7);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| estimate_length(std::slice::from_ref(&p), 100_000, 1.0, 9).unwrap());
    let b = four.install(|| estimate_length(std::slice::from_ref(&p), 100_000, 1.0, 9).unwrap());
    assert_eq!(a.length.to_bits(), b.length.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

#[test]
fn homothety_scales_the_estimate() {
    let p = regular_polygon(30, 0.6);
    let q = homothety_polyline(&p, 2.5).unwrap();
    let a = estimate_length(std::slice::from_ref(&p), 100_000, 1.0, 4).unwrap();
    let b = estimate_length(std::slice::from_ref(&q), 100_000, 2.5, 4).unwrap();
    assert!((b.length - 2.5 * a.length).abs() < 1e-9 * b.length, "{} vs {}", b.length, 2.5 * a.length);
}
