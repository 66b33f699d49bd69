//! Counter-based normal variates.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so paths can be
//! generated in any order or on any number of threads with identical results.

use statrs::function::erf::erfc_inv;
use std::f64::consts::SQRT_2;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// 64 random bits for a counter position.
#[inline]
pub fn bits(seed: u64, stream: u64, counter: u64) -> u64 {
    let a = mix(seed.wrapping_add(GOLDEN));
    let b = mix(a ^ stream.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019));
    mix(b ^ counter.wrapping_mul(0xd1b5_4a32_d192_ed03).wrapping_add(GOLDEN))
}

/// Uniform on the open interval (0, 1).
#[inline]
pub fn uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    ((bits(seed, stream, counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via the inverse CDF.
#[inline]
pub fn normal(seed: u64, stream: u64, counter: u64) -> f64 {
    let u = uniform(seed, stream, counter);
    -SQRT_2 * erfc_inv(2.0 * u)
}

/// Standard normals for `counter = offset..offset+n` on one stream.
pub fn normals(seed: u64, stream: u64, offset: u64, n: usize) -> Vec<f64> {
    (0..n as u64).map(|c| normal(seed, stream, offset + c)).collect()
}
