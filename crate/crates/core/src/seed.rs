//! Seed derivation for the independent RNG streams used across the toolkit.
//!
//! Every randomized stage (parameter init, dropout, epoch shuffles, restart
//! seeds, synthetic sampling) gets its own `ChaCha8Rng` seeded from a value
//! derived here, so stages never share or perturb each other's streams.

/// Mixes a base seed with a stream tag into a well-scrambled sub-seed.
///
/// Uses the SplitMix64 finalizer, whose output is a bijection of its input:
/// distinct `(seed, stream)` pairs with the same XOR are still separated by
/// the multiply-shift cascade.
#[must_use]
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
