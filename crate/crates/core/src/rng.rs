//! Seeding helpers. Every replica gets its own ChaCha stream derived from
//! `(base_seed, purpose, replica_index)`, so results do not depend on how
//! replicas are scheduled over workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes; keeps walk, environment and noise draws independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Dynamics = 0x6479_6e61,
    Environment = 0x656e_7669,
    InitialState = 0x696e_6974,
    Limit = 0x6c69_6d74,
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a sequence of words into one 64-bit key.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x243F_6A88_85A3_08D3, |h, &w| mix64(h ^ mix64(w)))
}

/// Uniform in `[0, 1)` from the top 53 bits of `x`.
#[inline]
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Key shared by all draws of one replica for one purpose.
pub fn replica_key(base_seed: u64, purpose: Purpose, replica: u64) -> u64 {
    hash_words(&[base_seed, purpose as u64, replica])
}

/// Generator for one replica and purpose.
pub fn replica_rng(base_seed: u64, purpose: Purpose, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(hash_words(&[base_seed, purpose as u64]));
    rng.set_stream(replica);
    rng
}
