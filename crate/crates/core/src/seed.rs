//! Labelled seed derivation. Every random stream (factor init, splits,
//! synthetic data, SGD shuffles) is drawn from a ChaCha8 generator seeded by
//! `derive_seed(master, label)`, so adding a new stream never shifts an
//! existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable sub-seed for `label` under `master` (FNV-1a over the label, mixed
/// with the master seed through splitmix64).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(master ^ splitmix64(hash))
}

pub fn rng_for(master: u64, label: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(master, label))
}
