//! Keyed seed derivation.
//!
//! Every random stream in the crate is an independent ChaCha generator whose
//! seed is derived from a parent seed and a string tag. There is no global
//! random state: one master seed plus the tags used along the way reproduce a
//! whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Derives a child seed from `seed` and a tag. Stable across platforms and
/// releases; changing it changes every recorded result.
pub fn derive(seed: u64, tag: &str) -> u64 {
    splitmix64(splitmix64(seed) ^ fnv1a(tag.as_bytes()))
}

/// Derives a child seed from `seed`, a tag and a numeric counter.
pub fn derive_indexed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(derive(seed, tag) ^ splitmix64(index))
}

/// A generator for the stream named `tag` under `seed`.
pub fn stream(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag))
}

/// A 64-bit key for sorting items into a seeded order independent of their
/// input positions.
pub fn sort_key(seed: u64, tag: &str, item: &str) -> u64 {
    splitmix64(derive(seed, tag) ^ fnv1a(item.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive(7, "noise"), derive(7, "noise"));
        assert_ne!(derive(7, "noise"), derive(7, "split"));
        assert_ne!(derive(7, "noise"), derive(8, "noise"));
        assert_ne!(derive_indexed(7, "level", 0), derive_indexed(7, "level", 1));
    }

    #[test]
    fn streams_replay() {
        let a: Vec<u32> = stream(3, "x").random_iter().take(8).collect();
        let b: Vec<u32> = stream(3, "x").random_iter().take(8).collect();
        assert_eq!(a, b);
    }
}
