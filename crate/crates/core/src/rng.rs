//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 (64-bit seed). A run has one global
//! seed; every unit of work derives its own stream as
//! `ChaCha8(seed = global_seed, stream = fnv1a64(scope))`, so the numbers an
//! image sees do not depend on how many images were processed before it or
//! on which thread ran it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the bytes of `parts`, with a separator between parts.
pub fn fnv1a64(parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for b in part.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Stream for one named scope, e.g. `["img_001", "inject", "3"]`.
pub fn substream(global_seed: u64, scope: &[&str]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(global_seed);
    rng.set_stream(fnv1a64(scope));
    rng
}

/// A 64-bit seed recorded alongside an artifact so it can be replayed alone.
pub fn derived_seed(global_seed: u64, scope: &[&str]) -> u64 {
    use rand::RngCore;
    substream(global_seed, scope).next_u64()
}
