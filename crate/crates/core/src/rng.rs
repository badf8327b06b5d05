//! Deterministic RNG streams. Every random draw in the crate comes from a
//! ChaCha stream keyed by a base seed plus a small tuple of stream ids, so
//! results never depend on call order across independent components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix(seed), |acc, s| splitmix(acc ^ splitmix(*s)))
}

pub fn stream(seed: u64, ids: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, ids))
}

/// Stable 64-bit id for a string label (FNV-1a).
pub fn label_id(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
