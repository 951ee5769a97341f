//! Named random substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a root seed and a stream
//! name, so the same `(seed, name)` pair always reproduces the same numbers no matter how work is
//! scheduled.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn substream(seed: u64, name: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Standard complex Gaussian with independent `N(0, 1)` real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Circular complex Gaussian `CN(0, variance)`: each part has variance `variance / 2`.
pub fn circular_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    complex_normal(rng) * (0.5 * variance).sqrt()
}

pub fn random_complex_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}
