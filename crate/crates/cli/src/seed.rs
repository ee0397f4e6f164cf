//! Stable seed derivation: every (base, cell, trial) triple maps to its own
//! stream independent of scheduling.

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_seed(base: u64, cell: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ cell) ^ trial)
}

/// Sub-stream `tag` of a trial seed (instance, sampling/noise, ...).
pub fn stream(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
