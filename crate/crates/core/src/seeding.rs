//! Deterministic derivation of per-task RNG seeds from one master seed.
//!
//! Every randomized stage of the pipeline (graph generation, trial loops,
//! optimizer restarts, sampling) owns a seed derived here, so a run is
//! reproducible from its master seed alone and stages stay independent.

/// SplitMix64 finalizer over (master, index). Distinct indices give
/// statistically independent streams for any fixed master seed.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
