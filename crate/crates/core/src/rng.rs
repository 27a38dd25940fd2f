//! Seeded randomness. Every stochastic component draws from a ChaCha8 stream
//! derived from an explicit seed so that runs are bit-reproducible.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream label (splitmix64 finaliser).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a fresh child seed from a parent stream.
pub fn next_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}
