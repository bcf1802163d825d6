//! Deterministic seed derivation.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` seeded
//! through [`mix_seed`], so results depend only on user-visible seeds and
//! never on iteration order, thread count or platform.

/// SplitMix64 finalizer; bijective on `u64`.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and two indices.
pub(crate) fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    let h = mix64(base.wrapping_add(GOLDEN.wrapping_mul(a.wrapping_add(1))));
    mix64(h.wrapping_add(GOLDEN.wrapping_mul(b.wrapping_add(2))))
}
