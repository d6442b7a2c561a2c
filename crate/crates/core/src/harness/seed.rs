//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is seeded by walking a path of
//! integer labels from the master seed: `child = mix(parent, label)`. The
//! paths used are
//!
//! - channel draws: `master / trial / CHANNEL / criterion / colour channel`
//! - stream noise: `master / trial / NOISE / criterion / snr index / colour channel / stream`
//! - interleavers: `master / INTERLEAVER / criterion / colour channel / stream`
//!
//! Allocators are deliberately absent from every path, so all allocators
//! of a trial see the same fading and the same noise seeds.

pub const CHANNEL: u64 = 1;
pub const NOISE: u64 = 2;
pub const INTERLEAVER: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label))
}

pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |s, &l| mix(s, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn distinct_paths_give_distinct_seeds() {
        let mut seen = HashSet::new();
        for t in 0..50 {
            for k in 0..24 {
                assert!(seen.insert(derive(7, &[t, NOISE, 2, 0, 0, k])));
                assert!(seen.insert(derive(7, &[t, CHANNEL, 2, k])));
            }
        }
        assert_eq!(derive(7, &[1, 2]), mix(mix(7, 1), 2));
        assert_ne!(derive(7, &[1, 2]), derive(7, &[2, 1]));
    }
}
