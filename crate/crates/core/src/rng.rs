//! Seed derivation and per-life random streams.
//!
//! Every random quantity in the crate is drawn from a [`Stream`] obtained by
//! [`stream`]. A stream is identified by a master seed and a sub-stream index;
//! the pair is mixed with splitmix64 and the result seeds a ChaCha8 generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete generator behind every stream.
pub type Stream = ChaCha8Rng;

/// Name recorded in suite headers so files state how they were produced.
pub const GENERATOR_NAME: &str = "splitmix64+chacha8";

/// Sub-stream index reserved for a life's world.
pub const WORLD_STREAM: u64 = 0;
/// Sub-stream index reserved for a life's agent.
pub const AGENT_STREAM: u64 = 1;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Output number `index + 1` of a splitmix64 sequence started at `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream(seed: u64, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}
