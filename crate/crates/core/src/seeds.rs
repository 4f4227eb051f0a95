//! Seed splitting and stable hashing.
//!
//! All randomness in the engine derives from a single 64-bit seed. Independent
//! streams are obtained with [`derive_seed`], which mixes the base seed with
//! the FNV-1a hash of a stream label through the SplitMix64 finalizer:
//!
//! | stream           | label       | used for                          |
//! |------------------|-------------|-----------------------------------|
//! | random scorer    | `"scorer"`  | [`crate::scorers::RandomScorer`]  |
//! | fractional-k     | `"prune"`   | Bernoulli draws in pruning        |
//! | per-topic prune  | topic id    | derived again from the prune seed |
//!
//! These functions are part of the reproducibility contract: changing them
//! changes every simulation output.

pub const SCORER_STREAM: &str = "scorer";
pub const PRUNE_STREAM: &str = "prune";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: &str) -> u64 {
    mix64(base ^ mix64(fnv1a(stream.as_bytes())))
}

/// Combines a seed with an integer index into a fresh 64-bit value.
pub fn mix_index(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn streams_are_distinct() {
        assert_ne!(derive_seed(7, SCORER_STREAM), derive_seed(7, PRUNE_STREAM));
        assert_ne!(derive_seed(7, PRUNE_STREAM), derive_seed(8, PRUNE_STREAM));
        assert_eq!(derive_seed(7, "t1"), derive_seed(7, "t1"));
    }

    #[test]
    fn unit_range() {
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }
}
