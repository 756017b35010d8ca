//! Seed derivation and generator construction.
//!
//! Replication `r` of an experiment with master seed `s` uses
//! `derive_seed(s, r)`: SplitMix64 applied to `s` xor the SplitMix64 image of
//! `r + 1`. Each replication owns its generator; there is no shared stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// One SplitMix64 output step (Steele, Lea & Flood finalizer).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}

/// Generator for `stream` of a seed. Distinct streams of one seed are
/// independent ChaCha streams over the same key.
pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
