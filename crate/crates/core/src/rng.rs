//! Seeded random streams.
//!
//! Every session draws from one 64-bit master seed. Each party gets its own
//! ChaCha8 stream: the generator is seeded with `ChaCha8Rng::seed_from_u64(master)`
//! and then moved to the stream number of its [`StreamId`]. Streams never
//! overlap, so swapping Bob's strategy cannot perturb Alice's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named random streams. The numeric values are part of the reproducibility
/// contract and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamId {
    Alice = 1,
    Bob = 2,
    Physics = 3,
    Source = 4,
}

pub fn stream(master: u64, id: StreamId) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id as u64);
    rng
}

/// SplitMix64 finalizer, used to derive per-cell seeds for sweeps.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A fresh 63-bit master seed from the OS entropy source.
pub fn entropy_seed() -> u64 {
    rand::random::<u64>() >> 1
}
