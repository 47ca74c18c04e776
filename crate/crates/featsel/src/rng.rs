//! Deterministic RNG streams.
//!
//! Every randomized stage draws from a ChaCha stream derived from the run
//! seed plus a stage name, so adding a stage never perturbs the randomness
//! of the others. Per-observation workers additionally fold the observation
//! index into the seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stable 64-bit FNV-1a. `DefaultHasher` is not guaranteed stable across
/// releases, and stream ids must never move between versions.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for a named stage of a seeded run.
pub fn stream_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a64(stream.as_bytes()));
    rng
}

/// RNG for per-observation work inside a stage: `seed ⊕ observation_index`.
pub fn observation_rng(seed: u64, stream: &str, observation_index: u64) -> ChaCha8Rng {
    stream_rng(seed ^ observation_index, stream)
}
