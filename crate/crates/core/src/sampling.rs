//! Seed derivation and counter-based Poisson sampling.
//!
//! Every random draw is addressed by `(seed, index)`: the generator for item
//! `k` is ChaCha8 seeded with `seed` on stream `k`, so results do not depend on
//! evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

/// Child seed for a named task, stable across platforms and releases.
pub fn derive_seed(base: u64, path: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(path.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Generator for item `index` of a seeded batch.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Poisson draw with mean `lambda`; `lambda = 0` gives 0.
pub fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng),
        Err(_) => 0.0,
    }
}

/// Independent Poisson counts with means `pairs · p_k`, item `k` on stream `k`.
pub fn poisson_counts(probabilities: &[f64], pairs: f64, seed: u64) -> Vec<f64> {
    probabilities
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let mut rng = item_rng(seed, k as u64);
            poisson(&mut rng, pairs * p.max(0.0))
        })
        .collect()
}
