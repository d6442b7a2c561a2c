//! Seeded uniform random bit interleaver.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Permutation `perm` such that `out[i] = in[perm[i]]`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    perm
}

pub fn interleave(bits: &[u8], seed: u64) -> Vec<u8> {
    permutation(bits.len(), seed).into_iter().map(|i| bits[i]).collect()
}

pub fn deinterleave(bits: &[u8], seed: u64) -> Vec<u8> {
    let mut out = vec![0u8; bits.len()];
    for (b, i) in bits.iter().zip(permutation(bits.len(), seed)) {
        out[i] = *b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seeds_give_different_permutations() {
        assert_ne!(permutation(64, 1), permutation(64, 2));
        assert_eq!(permutation(64, 1), permutation(64, 1));
    }

    proptest! {
        #[test]
        fn round_trip(bits in proptest::collection::vec(0u8..2, 0..500), seed in any::<u64>()) {
            prop_assert_eq!(deinterleave(&interleave(&bits, seed), seed), bits);
        }

        #[test]
        fn is_a_bijection(len in 0usize..300, seed in any::<u64>()) {
            let mut perm = permutation(len, seed);
            perm.sort_unstable();
            prop_assert_eq!(perm, (0..len).collect::<Vec<_>>());
        }

        #[test]
        fn preserves_bit_multiset(bits in proptest::collection::vec(0u8..2, 0..500), seed in any::<u64>()) {
            let ones = bits.iter().filter(|&&b| b == 1).count();
            let out = interleave(&bits, seed);
            prop_assert_eq!(out.iter().filter(|&&b| b == 1).count(), ones);
        }
    }
}
