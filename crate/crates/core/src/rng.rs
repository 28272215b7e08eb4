//! Counter-based random streams.
//!
//! Every replicate, cell and run draws from its own ChaCha stream keyed by a
//! base seed and a tuple of counters, so results never depend on how work is
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for `(seed, ids...)`.
pub fn stream(seed: u64, ids: &[u64]) -> StreamRng {
    let mut key = 0x5EED_u64;
    for &id in ids {
        key = splitmix64(key ^ id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// A 64-bit seed derived from `(seed, ids...)`, for components that take a
/// plain seed rather than a stream.
pub fn derive_seed(seed: u64, ids: &[u64]) -> u64 {
    let mut key = splitmix64(seed);
    for &id in ids {
        key = splitmix64(key ^ id);
    }
    key
}

/// `n` standard normal draws.
pub fn normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
