//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit generator. Sub-streams are
//! derived from a master seed by ChaCha stream id, so stream `k` of seed `s`
//! is the same sequence regardless of how many other streams were consumed
//! or in which order they run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for `(master, stream)`.
pub fn derive_rng(master: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Mixes a master seed with a cell/replicate counter into a fresh seed.
pub fn sub_seed(master: u64, counter: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
