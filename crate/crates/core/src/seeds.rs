//! Seed derivation. Every random stream in the simulator is a ChaCha8 RNG
//! seeded by a pure function of (master seed, stream tag, index), so any
//! replicate or sub-stream can be reproduced in isolation and streams never
//! alias each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Values are arbitrary but fixed forever; changing one changes
/// every simulation result downstream of it.
pub const POPULATION: u64 = 0x706f_7075;
pub const GRAPH: u64 = 0x6772_6170;
pub const COMMUNICATION: u64 = 0x636f_6d6d;
pub const MEDIA: u64 = 0x6d65_6469;
pub const CALIBRATION: u64 = 0x6361_6c69;

/// SplitMix64 finalizer. Standard constants from the reference
/// implementation; bijective on u64.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed for stream `tag`, sub-stream `index`, under `master`.
/// Pure and platform independent.
pub fn derive(master: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(master) ^ tag) ^ index)
}

/// ChaCha8 stream for (master, tag, index). All simulator randomness flows
/// through RNGs constructed here.
pub fn stream(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tag, index))
}
