//! Deterministic random streams.
//!
//! Sequential parts of the filter (initialization, resampling, per-step keys) draw from a
//! [`MasterRng`]. Work that may run in parallel draws from a [`StreamRng`] keyed by
//! `(key, index)`, so the draws of item `i` never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_pcg::Pcg64Mcg;

pub type MasterRng = ChaCha8Rng;
pub type StreamRng = Pcg64Mcg;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a seed. Order matters; distinct paths give unrelated seeds.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(root), |acc, &p| {
        mix64(acc ^ mix64(p.wrapping_add(GOLDEN_GAMMA)))
    })
}

pub fn master(seed: u64) -> MasterRng {
    MasterRng::seed_from_u64(seed)
}

/// Sub-stream `index` of the family identified by `key`.
#[inline]
pub fn substream(key: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix64(key ^ mix64(index.wrapping_mul(GOLDEN_GAMMA))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, 3).random();
        let b: u64 = substream(7, 3).random();
        let c: u64 = substream(7, 4).random();
        let d: u64 = substream(8, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn derive_seed_depends_on_order() {
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
    }
}
