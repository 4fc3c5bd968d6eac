//! Seeded random streams.
//!
//! Every chain owns one [`ChainRng`]. Independent streams are derived from a
//! single 64-bit seed by selecting a ChaCha stream id, so chain `c` of seed `s`
//! is the same sequence no matter how many threads run it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a fresh base seed from `rng`; sub-streams of it are independent of
/// the parent sequence.
pub fn fork_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}
