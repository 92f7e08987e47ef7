//! Deterministic RNG substreams.
//!
//! Every parallel or repeated unit of work (bootstrap resample, sweep cell,
//! ensemble member, planning step) draws from its own ChaCha stream derived
//! from a base seed and a stream index, so results never depend on thread
//! scheduling or evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates nearby (seed, stream) pairs.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A reproducible RNG for stream `stream` of base seed `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(stream));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Folds a label into a stream index so callers can namespace substreams.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut acc = 0xcbf2_9ce4_8422_2325;
    for &p in parts {
        acc = splitmix64(acc ^ p);
    }
    acc
}
