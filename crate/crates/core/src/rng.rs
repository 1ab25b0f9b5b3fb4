//! Seed splitting.
//!
//! A run owns one 64-bit master seed. Every independent source of randomness
//! in an algorithm (explore coins, expert index, probe item, one stream per
//! expert) gets its own ChaCha stream derived from that seed, so two variants
//! run on the same seed consume identical random numbers for the parts they
//! share.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers. Expert streams start at `EXPERT_BASE`.
pub(crate) const EXPLORE_COIN: u64 = 1;
pub(crate) const EXPLORE_EXPERT: u64 = 2;
pub(crate) const EXPLORE_ITEM: u64 = 3;
pub(crate) const STREAM_PARAMS: u64 = 4;
pub(crate) const NOISE: u64 = 5;
pub(crate) const EXPERT_BASE: u64 = 1 << 16;

/// Deterministic RNG for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn expert_rng(seed: u64, expert: usize) -> Rng {
    stream_rng(seed, EXPERT_BASE + expert as u64)
}

pub(crate) fn noise_rng(seed: u64, optimizer: usize) -> Rng {
    stream_rng(seed, (NOISE << 32) + optimizer as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(stream_rng(7, 1), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(stream_rng(7, 1), |r, _| Some(r.random())).collect();
        let c: Vec<u64> = (0..4).map(|_| 0).scan(stream_rng(7, 2), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
