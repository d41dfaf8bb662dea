//! Seeding policy.
//!
//! Realization `i` of an ensemble with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(derive_seed(s, i))`, with independent ChaCha
//! streams for the Brownian and the fractional driver. The derivation is
//!
//! ```text
//! derive_seed(s, i) = fmix64(s + (i + 1) · 0x9E3779B97F4A7C15)   (mod 2^64)
//! ```
//!
//! where `fmix64` is the SplitMix64 finalizer. Both maps are bijections on
//! `u64` for fixed `s`, so distinct indices never share a seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn fmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    fmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Stream used for the Brownian increments.
pub const STREAM_BM: u64 = 0;
/// Stream used for the fractional Gaussian noise.
pub const STREAM_FGN: u64 = 1;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn stable_values() {
        // pinned so that ensembles stay reproducible across versions;
        // the first value is the first SplitMix64 output for state 0
        assert_eq!(derive_seed(0, 0), fmix64(GOLDEN));
        assert_eq!(derive_seed(0, 0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(derive_seed(1, 0), 0x910a_2dec_8902_5cc1);
        assert_eq!(derive_seed(1, 1), 0xbeeb_8da1_658e_ec67);
        assert_eq!(derive_seed(42, 999), 0x6609_1ca8_5313_fa68);
        assert_eq!(derive_seed(42, 7), derive_seed(42, 7));
        assert_ne!(derive_seed(42, 7), derive_seed(42, 8));
        assert_ne!(derive_seed(42, 7), derive_seed(43, 7));
    }

    #[test]
    fn no_collisions_in_a_million() {
        let mut seen = HashSet::with_capacity(1 << 21);
        for i in 0..1_000_000u64 {
            assert!(seen.insert(derive_seed(20240611, i)), "collision at {i}");
        }
    }

    #[test]
    fn streams_differ() {
        use rand::RngCore;
        let a = stream_rng(5, STREAM_BM).next_u64();
        let b = stream_rng(5, STREAM_FGN).next_u64();
        assert_ne!(a, b);
    }
}
