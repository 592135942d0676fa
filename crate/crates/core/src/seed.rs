//! Deterministic seed derivation for independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed, a stream label and indices such
/// as `(round, client, group)`.
pub fn derive_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    for b in label.bytes() {
        h = mix(h ^ u64::from(b));
    }
    h = mix(h ^ 0xff);
    for &i in indices {
        h = mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ i);
    }
    h
}

pub fn stream(master: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label, indices))
}
