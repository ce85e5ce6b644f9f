//! Small sampling helpers over a caller-owned [`RngCore`].

use rand_core::RngCore;

const SCALE: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform draw on `[0, 1)` with 53 bits of resolution.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * SCALE
}

/// Returns `1` with probability `p`, `0` otherwise.
///
/// `p <= 0` never fires and `p >= 1` always fires.
#[inline]
pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> u8 {
    u8::from(uniform(rng) < p)
}
