//! Cauchy–Crofton length estimation.
//!
//! Hyperplanes are drawn with a sphere-uniform unit normal `a` and an offset
//! `b` uniform on `[−R, R]`. A segment of length `ℓ` inside the ball of
//! radius `R` is then crossed with probability `κ_n ℓ / (2R)`, where
//! `κ_n = E|⟨a, t⟩|`, so `(2R/κ_n)·mean(count)` is unbiased for the length.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::barvinok::bounds;
use crate::error::{Error, Result};
use crate::rng;
use crate::{Hyperplane, Point, Polyline};

/// `Γ(x + ½) / Γ(x)` for `x > 0`: asymptotic series for `x ≥ 100`, upward
/// recurrence below.
fn half_gamma_ratio(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut factor = 1.0;
    // Γ(x+½)/Γ(x) = R(x+1) · x/(x+½)
    while x + shift < 100.0 {
        factor *= (x + shift) / (x + shift + 0.5);
        shift += 1.0;
    }
    let y = x + shift;
    let t = 1.0 / y;
    let series = 1.0
        + t * (-1.0 / 8.0
            + t * (1.0 / 128.0 + t * (5.0 / 1024.0 + t * (-21.0 / 32768.0 + t * (-399.0 / 262144.0 + t * (869.0 / 4194304.0))))));
    factor * y.sqrt() * series
}

/// `ν(n) = 2 Γ(½) Γ((n+1)/2) / Γ(n/2)`, the measure of hyperplanes meeting
/// the unit ball.
pub fn nu(n: usize) -> f64 {
    assert!(n >= 1, "nu needs n ≥ 1");
    2.0 * std::f64::consts::PI.sqrt() * half_gamma_ratio(n as f64 / 2.0)
}

/// `κ_n = Γ(n/2) / (√π Γ((n+1)/2))`, the mean of `|⟨a, t⟩|` for a uniform
/// unit `a` and a fixed unit `t`. Computed by the recurrence
/// `κ_{n+2} = κ_n · n/(n+1)` (from `κ_1 = 1`, `κ_2 = 2/π`) up to `n = 10⁴`,
/// independently of [`nu`]; beyond that through the gamma ratio.
pub fn kappa(n: usize) -> f64 {
    assert!(n >= 1, "kappa needs n ≥ 1");
    if n > 10_000 {
        return 1.0 / (std::f64::consts::PI.sqrt() * half_gamma_ratio(n as f64 / 2.0));
    }
    let (mut m, mut k) = if n % 2 == 1 { (1usize, 1.0) } else { (2usize, 2.0 / std::f64::consts::PI) };
    while m < n {
        k *= m as f64 / (m as f64 + 1.0);
        m += 2;
    }
    k
}

/// Hyperplane with a sphere-uniform normal and offset uniform on `[−R, R]`.
pub fn sample_hyperplane<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Hyperplane {
    let a = rng::unit_vector(rng, n);
    let b = rng.random_range(-radius..=radius);
    Hyperplane::from_unit(a, b)
}

/// Vertices with `|side| ≤ VERTEX_TIE` count as lying on the hyperplane.
pub const VERTEX_TIE: f64 = 1e-14;

/// Crossings of `h` with a polyline: segments whose endpoints strictly
/// straddle `h`, plus each vertex lying on `h` once (its two adjacent
/// segments are then not counted).
pub fn count_intersections(h: &Hyperplane, polyline: &Polyline) -> usize {
    let v = polyline.vertices();
    if v.is_empty() {
        return 0;
    }
    let s: Vec<f64> = v.iter().map(|p| h.side_unchecked(p)).collect();
    count_range(&s, 0, v.len(), polyline.is_closed() && v.len() > 2)
}

/// Counts on-vertices in `[lo, hi)` and segments `(i, i+1)` for `i` in
/// `[lo, hi)` (wrapping when closed, otherwise stopping at the last vertex).
fn count_range(s: &[f64], lo: usize, hi: usize, closed: bool) -> usize {
    let n = s.len();
    let mut count = 0;
    for i in lo..hi {
        let a = s[i];
        let a_on = a.abs() <= VERTEX_TIE;
        if a_on {
            count += 1;
        }
        let j = i + 1;
        if j == n && !closed {
            continue;
        }
        let b = s[j % n];
        if !a_on && b.abs() > VERTEX_TIE && (a < 0.0) != (b < 0.0) {
            count += 1;
        }
    }
    count
}

/// Polyline split into chunks with bounding balls, so most hyperplanes are
/// rejected without visiting vertices.
struct Chunked<'a> {
    line: &'a Polyline,
    /// `(lo, hi, center, radius)`: chunk owns vertices `[lo, hi)` and the
    /// segments leaving them; the ball covers vertices `lo..=hi`.
    chunks: Vec<(usize, usize, Point, f64)>,
    closed: bool,
}

const CHUNK: usize = 64;

impl<'a> Chunked<'a> {
    fn new(line: &'a Polyline) -> Self {
        let v = line.vertices();
        let n = v.len();
        let closed = line.is_closed() && n > 2;
        let mut chunks = Vec::new();
        let mut lo = 0;
        while lo < n {
            let hi = (lo + CHUNK).min(n);
            let last = if hi < n { hi } else if closed { 0 } else { n - 1 };
            let mut idx: Vec<usize> = (lo..hi).collect();
            idx.push(last);
            let center = idx.iter().fold(Point::zeros(v[0].len()), |acc, &i| acc + &v[i]) / idx.len() as f64;
            let radius = idx.iter().map(|&i| (&v[i] - &center).norm()).fold(0.0, f64::max);
            chunks.push((lo, hi, center, radius * (1.0 + 1e-12) + 2.0 * VERTEX_TIE));
            lo = hi;
        }
        Chunked { line, chunks, closed }
    }

    fn count(&self, h: &Hyperplane, scratch: &mut Vec<f64>) -> usize {
        let v = self.line.vertices();
        let n = v.len();
        let mut total = 0;
        for (lo, hi, c, r) in &self.chunks {
            if h.side_unchecked(c).abs() > *r {
                continue;
            }
            // Sides for lo..=hi (wrapping), evaluated locally.
            scratch.clear();
            for i in *lo..*hi {
                scratch.push(h.side_unchecked(&v[i]));
            }
            let next = if *hi < n {
                Some(*hi)
            } else if self.closed {
                Some(0)
            } else {
                None
            };
            let m = scratch.len();
            if let Some(j) = next {
                scratch.push(h.side_unchecked(&v[j]));
                total += count_local(scratch, m);
            } else {
                total += count_local_open_end(scratch);
            }
        }
        total
    }
}

/// `s` holds `m` owned vertices plus the following vertex.
fn count_local(s: &[f64], m: usize) -> usize {
    let mut count = 0;
    for i in 0..m {
        let a = s[i];
        let a_on = a.abs() <= VERTEX_TIE;
        if a_on {
            count += 1;
        } else {
            let b = s[i + 1];
            if b.abs() > VERTEX_TIE && (a < 0.0) != (b < 0.0) {
                count += 1;
            }
        }
    }
    count
}

fn count_local_open_end(s: &[f64]) -> usize {
    let m = s.len();
    let mut count = count_local(s, m - 1);
    if s[m - 1].abs() <= VERTEX_TIE {
        count += 1;
    }
    count
}

#[derive(Debug, Clone, Serialize)]
pub struct CroftonEstimate {
    pub length: f64,
    pub stderr: f64,
    pub samples: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub seed: u64,
}

const BATCH: usize = 4096;

/// `(2R/κ_n)·mean(count)` over `samples` random hyperplanes, summed over all
/// polylines in `curves`.
pub fn estimate_length(curves: &[Polyline], samples: usize, radius: f64, seed: u64) -> Result<CroftonEstimate> {
    let nonempty: Vec<&Polyline> = curves.iter().filter(|c| !c.is_empty()).collect();
    let Some(n) = nonempty.iter().find_map(|c| c.dim()) else {
        return Ok(CroftonEstimate {
            length: 0.0,
            stderr: 0.0,
            samples,
            radius,
            seed,
        });
    };
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("sampling radius must be positive".into()));
    }
    let extent = nonempty.iter().map(|c| c.extent()).fold(0.0, f64::max);
    if extent > radius {
        return Err(Error::CurveOutsideBall { extent, radius });
    }
    if nonempty.iter().any(|c| c.dim() != Some(n)) {
        return Err(Error::InvalidArgument("curves have different dimensions".into()));
    }
    let k = kappa(n);
    let identity = k * nu(n);
    assert!((identity - 2.0).abs() <= 1e-12, "κ_n·ν(n) = {identity}, expected 2");
    let chunked: Vec<Chunked> = nonempty.iter().map(|c| Chunked::new(c)).collect();
    let batches = samples.div_ceil(BATCH);
    // Integer sums keep the result independent of the reduction order.
    let (sum, sumsq) = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::substream(seed, "crofton.hyperplanes", b as u64);
            let mut scratch = Vec::with_capacity(CHUNK + 1);
            let count = BATCH.min(samples - b * BATCH);
            let (mut s, mut s2) = (0u64, 0u64);
            for _ in 0..count {
                let h = sample_hyperplane(n, radius, &mut g);
                let c: u64 = chunked.iter().map(|cl| cl.count(&h, &mut scratch) as u64).sum();
                s += c;
                s2 += c * c;
            }
            (s, s2)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let scale = 2.0 * radius / k;
    let m = samples as f64;
    let mean = sum as f64 / m;
    let var = if samples > 1 {
        ((sumsq as f64) - m * mean * mean).max(0.0) / (m - 1.0)
    } else {
        0.0
    };
    Ok(CroftonEstimate {
        length: scale * mean,
        stderr: scale * (var / m).sqrt(),
        samples,
        radius,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthBoundReport {
    pub estimate: CroftonEstimate,
    pub k: usize,
    pub n: usize,
    /// `log10(ν(n)·p_k(n))`.
    pub log10_bound: f64,
    /// `log10(bound / estimate)`; infinite for an empty curve.
    pub log10_slack: f64,
    pub holds: bool,
}

/// Compares a Crofton estimate of the curve length with `ν(n)·p_k(n)`.
pub fn length_vs_bound(curves: &[Polyline], k: usize, n: usize, samples: usize, radius: f64, seed: u64) -> Result<LengthBoundReport> {
    let estimate = estimate_length(curves, samples, radius, seed)?;
    let log10_bound = nu(n).log10() + bounds::bound_p(k, n).log10();
    let log10_slack = if estimate.length > 0.0 {
        log10_bound - estimate.length.log10()
    } else {
        f64::INFINITY
    };
    Ok(LengthBoundReport {
        holds: estimate.length.log10() <= log10_bound || estimate.length == 0.0,
        estimate,
        k,
        n,
        log10_bound,
        log10_slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;
    use std::f64::consts::PI;

    #[test]
    fn nu_examples() {
        assert!((nu(2) - PI).abs() < 1e-12);
        assert!((nu(3) - 4.0).abs() < 1e-12);
        assert!((nu(1) - 2.0).abs() < 1e-12);
        let n = 100_000.0;
        let v = nu(100_000);
        assert!(v.is_finite());
        assert!((v / (2.0 * PI * n).sqrt() - 1.0).abs() < 0.01);
    }

    #[test]
    fn kappa_nu_identity() {
        for n in 1..=10_000 {
            assert!((kappa(n) * nu(n) - 2.0).abs() <= 1e-12, "n = {n}");
        }
    }

    #[test]
    fn tie_rule_examples() {
        let seg = Polyline::new(vec![point(&[0.0, 0.0]), point(&[1.0, 0.0])], false).unwrap();
        let h = Hyperplane::new(point(&[1.0, 0.0]), 0.5).unwrap();
        assert_eq!(count_intersections(&h, &seg), 1);
        let square = Polyline::new(
            vec![point(&[0.0, 0.0]), point(&[1.0, 0.0]), point(&[1.0, 1.0]), point(&[0.0, 1.0])],
            true,
        )
        .unwrap();
        assert_eq!(count_intersections(&h, &square), 2);
        let vee = Polyline::new(vec![point(&[1.0, 1.0]), point(&[0.0, 0.0]), point(&[1.0, -1.0])], false).unwrap();
        let h0 = Hyperplane::new(point(&[1.0, 0.0]), 0.0).unwrap();
        assert_eq!(count_intersections(&h0, &vee), 1);
    }

    #[test]
    fn chunked_count_matches_direct_count() {
        let m = 1000;
        let circle: Vec<Point> = (0..m)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / m as f64;
                point(&[0.9 * t.cos(), 0.9 * t.sin()])
            })
            .collect();
        for closed in [true, false] {
            let line = Polyline::new(circle.clone(), closed).unwrap();
            let ch = Chunked::new(&line);
            let mut g = rng::substream(1, "t", 0);
            let mut scratch = Vec::new();
            for _ in 0..2000 {
                let h = sample_hyperplane(2, 1.0, &mut g);
                assert_eq!(ch.count(&h, &mut scratch), count_intersections(&h, &line));
            }
            // Hyperplanes through vertices exercise the tie rule across chunk boundaries.
            for i in [0, 63, 64, 65, 999] {
                let h = Hyperplane::new(point(&[1.0, 0.3]), point(&[1.0, 0.3]).dot(&circle[i])).unwrap();
                assert_eq!(ch.count(&h, &mut scratch), count_intersections(&h, &line), "vertex {i}");
            }
        }
    }

    #[test]
    fn empty_curve_and_outside_ball() {
        let e = estimate_length(&[Polyline::empty()], 1000, 1.0, 1).unwrap();
        assert_eq!((e.length, e.stderr), (0.0, 0.0));
        let seg = Polyline::new(vec![point(&[0.0, 0.0]), point(&[2.0, 0.0])], false).unwrap();
        assert!(matches!(estimate_length(&[seg], 10, 1.0, 1), Err(Error::CurveOutsideBall { .. })));
    }
}
