//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a master seed plus a path of
//! integers (combination key, simulation index, replicate index, ...), so the
//! values drawn never depend on which worker ran the item or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

// Stream tags keep independent consumers of one index path apart.
pub(crate) const TAG_DATASET: u64 = 0x6461_7461;
pub(crate) const TAG_BOOTSTRAP: u64 = 0x626f_6f74;
pub(crate) const TAG_STUDENTIZED: u64 = 0x7374_7564;
pub(crate) const TAG_SE_TABLE: u64 = 0x7365_7462;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `master` with each element of `path` into a single 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// Stable 64-bit FNV-1a hash of a string, used to turn combination labels
/// into stream path components.
pub fn label_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
