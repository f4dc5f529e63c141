//! Deterministic seed derivation.
//!
//! All randomness in a run flows from one top-level seed; each consumer
//! (sampler, EM initializer, cross-validation) gets its own substream so
//! adding draws in one place never perturbs another.

/// Named substream purposes.
pub const SAMPLER: u64 = 1;
pub const EM: u64 = 2;
pub const CV: u64 = 3;

/// Derives an independent seed for (purpose, index) from the master seed,
/// by running the combined words through SplitMix64.
pub fn substream(seed: u64, purpose: u64, index: u64) -> u64 {
    let mut x = seed ^ splitmix(purpose.wrapping_add(0x736f_6d65_7073_6575)) ^ splitmix(index.wrapping_mul(2).wrapping_add(1));
    x = splitmix(x);
    splitmix(x.wrapping_add(purpose).wrapping_add(index << 32))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
