//! Deterministic seed derivation and RNG streams.
//!
//! Every random quantity in this workspace is drawn from a ChaCha12 stream
//! whose seed is derived from a master seed plus a list of integer tags
//! (scenario, sample size, replicate index, purpose, ...). Tasks that run
//! concurrently each derive their own stream, so results never depend on
//! scheduling. The derivation below is part of the output contract: changing
//! it changes every downstream artifact byte-for-byte.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with an ordered list of tags into a child seed.
///
/// Each tag is spread over all 64 bits by an odd-constant multiply before it
/// is absorbed, and the state passes through a full avalanche step per tag.
/// Low-bit-adjacent masters or tags therefore yield unrelated children, and
/// the mapping is order-sensitive: `[a, b]` and `[b, a]` differ.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix(master ^ 0x9E37_79B9_7F4A_7C15);
    for &tag in tags {
        state = mix(state ^ tag.wrapping_mul(0xA24B_AED4_963E_E407));
    }
    state
}

/// A fresh ChaCha12 stream for the given master seed and tags.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, tags))
}

/// A uniform draw from the open interval (0, 1), built from the top 53 bits
/// of one `u64`. Never returns exactly 0 or 1, so it can feed inverse-CDF
/// samplers directly.
pub fn unit_open(rng: &mut impl rand_chacha::rand_core::RngCore) -> f64 {
    (((rng.next_u64() >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    #[test]
    fn derivation_is_stable_and_order_sensitive() {
        assert_eq!(derive_seed(7, &[1, 2]), derive_seed(7, &[1, 2]));
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_ne!(derive_seed(7, &[1]), derive_seed(7, &[1, 0]));
        assert_ne!(derive_seed(7, &[]), derive_seed(8, &[]));
    }

    #[test]
    fn adjacent_masters_and_tags_never_collide() {
        // Neighboring master seeds must not produce permuted copies of each
        // other's replicate streams.
        let mut children = std::vec::Vec::new();
        for master in 0..16u64 {
            for replicate in 0..64u64 {
                children.push(derive_seed(master, &[3, 200, replicate]));
            }
        }
        children.sort_unstable();
        children.dedup();
        assert_eq!(children.len(), 16 * 64);
    }

    #[test]
    fn streams_reproduce() {
        let mut a = stream(42, &[3, 200, 17]);
        let mut b = stream(42, &[3, 200, 17]);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn unit_open_stays_inside() {
        let mut rng = stream(1, &[]);
        for _ in 0..10_000 {
            let u = unit_open(&mut rng);
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
