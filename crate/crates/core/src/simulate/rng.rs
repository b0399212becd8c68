//! Random streams for stochastic runs.
//!
//! Each run owns one ChaCha8 generator seeded with a 64-bit value. Ensemble
//! members derive their seeds from the base seed with [`derive_seed`]: the
//! SplitMix64 finalizer of the base seed, offset by `(run_index + 1)` times
//! the golden-ratio increment, finalized again. Standard normal
//! variates come from the Marsaglia polar method, which yields two variates
//! per accepted pair; the second one is cached.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` in an ensemble with base seed `base`. The base is
/// mixed before the index is added, so neighbouring base seeds give
/// unrelated seed sequences.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Seeded uniform and normal variates for one run.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { rng: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1]`, safe to take the logarithm of.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
    }

    #[test]
    fn neighbouring_bases_do_not_share_runs() {
        let a: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(6, i)).collect();
        assert!((0..1000).all(|i| !a.contains(&derive_seed(7, i))));
    }

    #[test]
    fn normal_moments() {
        let mut s = RandomStream::new(42);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn uniform_open0_never_zero() {
        let mut s = RandomStream::new(1);
        assert!((0..10_000).all(|_| {
            let u = s.uniform_open0();
            u > 0.0 && u <= 1.0
        }));
    }
}
