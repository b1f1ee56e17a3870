//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by a
//! 64-bit seed and a stream id, so results are bit-identical across
//! platforms and independent of evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids, one per consumer, so unrelated draws never share a sequence.
pub mod streams {
    pub const MASK: u64 = 1;
    pub const MASK_OFFSET: u64 = 2;
    pub const PHANTOM: u64 = 3;
    pub const COILS: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const DERIVE: u64 = 6;
}

pub fn stream(seed: u64, stream_id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derives a child seed from a parent seed and a path of integer tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |acc, &tag| {
        let mut rng = stream(acc, streams::DERIVE);
        rng.set_word_pos(u128::from(tag) * 2);
        rng.next_u64()
    })
}
