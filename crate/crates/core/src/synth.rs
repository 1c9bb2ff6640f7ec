//! Seeded synthetic data: Gaussian-mixture vectors and a tone-plus-noise test signal.
//!
//! All outputs are rounded to `f32` so they survive a trip through `.f32` files.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codebooks::round_f32;
use crate::error::{Result, RvqError};

/// Mixture of isotropic Gaussians with seeded centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub dim: usize,
    pub centers: Vec<Vec<f64>>,
    pub spread: f64,
}

impl GaussianMixture {
    /// `components` centers drawn from N(0, 1) per axis; samples add N(0, spread²) noise.
    pub fn new(seed: u64, dim: usize, components: usize, spread: f64) -> Result<Self> {
        if dim == 0 || components == 0 {
            return Err(RvqError::arg("mixture needs dim >= 1 and components >= 1"));
        }
        if !(spread.is_finite() && spread >= 0.0) {
            return Err(RvqError::arg(format!("invalid spread {spread}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..components)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Ok(Self {
            dim,
            centers,
            spread,
        })
    }

    /// The default dataset used by the evaluation harness.
    pub fn standard(seed: u64, dim: usize) -> Self {
        Self::new(seed, dim, 8, 0.5).expect("valid parameters")
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.spread).expect("spread validated");
        (0..n)
            .map(|_| {
                let c = &self.centers[rng.random_range(0..self.centers.len())];
                c.iter()
                    .map(|m| round_f32(m + noise.sample(&mut rng)))
                    .collect()
            })
            .collect()
    }
}

/// A few detuned harmonic partials with slow amplitude modulation plus white noise.
pub fn test_signal(seed: u64, seconds: f64, sample_rate: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sample_rate as f64).round() as usize;
    let fundamental = rng.random_range(110.0..330.0);
    let partials: Vec<(f64, f64, f64)> = (1..=5)
        .map(|h| {
            let freq = fundamental * h as f64 * rng.random_range(0.99..1.01);
            let amp = 0.4 / h as f64;
            let phase = rng.random_range(0.0..2.0 * PI);
            (freq, amp, phase)
        })
        .collect();
    let noise = Normal::new(0.0, 0.05).expect("valid");
    let sr = sample_rate as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = 0.6 + 0.4 * (2.0 * PI * 1.5 * t).sin();
            let tone: f64 = partials
                .iter()
                .map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                .sum();
            round_f32(env * tone + noise.sample(&mut rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let m = GaussianMixture::standard(1, 4);
        assert_eq!(m.sample(10, 2), m.sample(10, 2));
        assert_ne!(m.sample(10, 2), m.sample(10, 3));
        assert_eq!(test_signal(5, 0.01, 24_000), test_signal(5, 0.01, 24_000));
        assert_eq!(test_signal(5, 0.5, 24_000).len(), 12_000);
    }

    #[test]
    fn signal_is_bounded() {
        assert!(test_signal(3, 0.2, 24_000).iter().all(|v| v.abs() < 2.0));
    }
}
