//! Deterministic inputs shared by the benchmarks.

use qkml_core::dataset::N_FEATURES;

/// `m` feature rows in `[0, pi]` from a fixed linear-congruential walk.
pub fn synthetic_rows(m: usize) -> Vec<Vec<f64>> {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    (0..m)
        .map(|_| {
            (0..N_FEATURES)
                .map(|_| {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::PI
                })
                .collect()
        })
        .collect()
}
