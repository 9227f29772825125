//! Splittable counter-based seed derivation.
//!
//! Every source of randomness in this crate is an explicit `u64` seed. Work
//! that fans out (replications, folds, per-source streams) derives one child
//! seed per branch with [`child_seed`], so branches can run in any order or
//! concurrently and still reproduce the sequential result bit for bit.

/// Derives the `index`-th child seed of `base`.
///
/// Defined as the SplitMix64 finalizer applied to
/// `base XOR (index + 1) * 0x9E3779B97F4A7C15`. The scheme is stateless:
/// `child_seed(base, i)` depends only on `(base, i)`.
pub fn child_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
