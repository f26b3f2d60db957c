//! Keyed random streams.
//!
//! Every stochastic draw in the crate comes from a ChaCha8 generator whose
//! key is the user seed and whose 64-bit stream id encodes what the draws are
//! for. Streams never overlap, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream-id domains. The top byte separates independent uses of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    TileNoise = 1,
    MarginNoise = 2,
    Trajectory = 3,
    Perturbation = 4,
    PriorImage = 5,
    DarkFrame = 6,
}

pub fn stream(seed: u64, domain: Domain, a: u32, b: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 8 bits domain, 24 bits `a`, 32 bits `b`.
    let id = (u64::from(domain as u8) << 56) | (u64::from(a & 0x00FF_FFFF) << 32) | u64::from(b);
    rng.set_stream(id);
    rng
}

/// Derive a child seed; used where one user seed fans out to many runs.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
