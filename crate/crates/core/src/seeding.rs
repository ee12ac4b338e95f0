//! Stable seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded through
//! [`rng_from_seed`]. Sub-seeds are derived with the SplitMix64 finaliser,
//! which is a bijection on `u64`; combined with an injective packing of the
//! inputs this makes [`sweep_seed`] collision-free for `cell < 2^32` and
//! `replicate < 2^32`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used for every stream.
pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a labelled child seed. Distinct labels give unrelated streams.
pub fn child_seed(seed: u64, label: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ label)
}

/// Run seed for replicate `replicate` of sweep cell `cell`.
pub fn sweep_seed(base_seed: u64, cell: u32, replicate: u32) -> u64 {
    let packed = (u64::from(cell) << 32) | u64::from(replicate);
    splitmix64(splitmix64(base_seed) ^ packed)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
