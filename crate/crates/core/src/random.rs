//! Seeded generators for reproducible test instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensorio::{MultiChannelSample, RealGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Grid of independent standard normal values.
pub fn normal_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealGrid {
    RealGrid::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn normal_sample(rng: &mut ChaCha8Rng, d: usize, rows: usize, cols: usize) -> MultiChannelSample {
    let channels = (0..d).map(|_| normal_grid(rng, rows, cols)).collect();
    MultiChannelSample::new(channels).expect("channels share a shape")
}

/// Unit-variance random sample fully determined by `seed`.
pub fn random_sample(seed: u64, d: usize, rows: usize, cols: usize) -> MultiChannelSample {
    normal_sample(&mut rng(seed), d, rows, cols)
}
