//! Seeded random streams.
//!
//! Every stochastic routine draws from a named substream of the user seed,
//! indexed by the work item (sample index, chunk index, start index). Results
//! therefore do not depend on how the work is split across threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Point;

pub type StreamRng = ChaCha8Rng;

fn name_hash(name: &str) -> u64 {
    // FNV-1a; only needs to be stable, not strong.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Independent generator for `(seed, name, index)`.
pub fn substream(seed: u64, name: &str, index: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&name_hash(name).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"qg-strm\0");
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, e.g. for handing one module its own seed.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    substream(seed, name, u64::MAX).random()
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Point {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Uniform direction on the unit sphere `S^{n−1}`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Point {
    loop {
        let g = gaussian_vector(rng, n);
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// Uniform point in the closed ball of the given radius.
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> Point {
    let dir = unit_vector(rng, n);
    let u: f64 = rng.random();
    dir * (radius * u.powf(1.0 / n as f64))
}

/// Uniform draw from `[−scale, scale]`.
pub fn symmetric_uniform<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    rng.random_range(-scale..=scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(substream(7, "x", 3), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(substream(7, "x", 3), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        let c: u64 = substream(7, "x", 4).random();
        let d: u64 = substream(7, "y", 3).random();
        assert_ne!(a[0], c);
        assert_ne!(a[0], d);
    }

    #[test]
    fn ball_draws_stay_inside() {
        let mut rng = substream(1, "ball", 0);
        for _ in 0..1000 {
            assert!(uniform_in_ball(&mut rng, 3, 0.5).norm() <= 0.5);
            assert!((unit_vector(&mut rng, 4).norm() - 1.0).abs() < 1e-12);
        }
    }
}
