//! Seed derivation and counter-based uniform draws.
//!
//! Every random decision in a cascade is a pure function of a 64-bit round seed and
//! a counter (directed edge slot or node id), so a cascade can be replayed from its
//! seed alone and different rounds never share state.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines two words into a well-avalanched child seed. Not symmetric.
#[inline]
pub fn mix(parent: u64, value: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ value.wrapping_mul(GOLDEN).rotate_left(23))
}

/// Uniform draw in `[0, 1)` from 53 high bits.
#[inline]
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The `counter`-th uniform draw of the stream `seed`.
#[inline]
pub fn draw(seed: u64, counter: u64) -> f64 {
    unit(splitmix64(seed ^ splitmix64(counter.wrapping_add(0xD1B5_4A32_D192_ED03))))
}

/// Order-insensitive identifier of a node set.
pub fn set_hash(nodes: &[usize]) -> u64 {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.iter().fold(0x5EED_5E75_u64 ^ sorted.len() as u64, |h, &v| mix(h, v as u64))
}

/// Named sub-streams so selection and evaluation randomness never overlap.
pub mod stream {
    pub const SELECTION: u64 = 0x5E1E_C710;
    pub const EVALUATION: u64 = 0xE7A1_0A7E;
    pub const WEIGHTS: u64 = 0x3E16_4775;
}
