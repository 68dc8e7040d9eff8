//! Deterministic random streams keyed by (master seed, household, category, week, ...).
//!
//! Every stochastic unit of work derives its own ChaCha stream from the master seed and a
//! list of keys, so results never depend on scheduling or on the number of workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Domain tags keeping streams of different purposes apart.
pub mod purpose {
    pub const POPULATION: u64 = 0x0070_6f70;
    pub const ADOPTION: u64 = 0x6164_6f70;
    pub const ORDERS: u64 = 0x6f72_6473;
    pub const PACKAGES: u64 = 0x7061_636b;
    pub const HOUSEHOLD_WEEKS: u64 = 0x6877_6b73;
    pub const ESTIMATION: u64 = 0x6573_7469;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit key for a label such as a household id (FNV-1a).
pub fn label_key(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Mixes a master seed with keys into one seed value.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

pub fn stream(master: u64, keys: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, keys))
}
