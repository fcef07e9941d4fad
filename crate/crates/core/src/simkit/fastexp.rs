//! Branch-free `exp` for the posterior-weight kernel.
//!
//! Range reduction `x = n·ln2 + r`, `|r| ≤ ln2/2`, then the degree-12 Taylor
//! polynomial of `e^r` in Estrin form and an exponent-field scale. Relative
//! error is below 6e-16 on `[-708, 708]`; arguments below −708 are clamped
//! (the weight is then negligible next to the unit maximum). There are no
//! branches or calls, so loops over this function vectorize, and the shallow
//! Estrin tree keeps the vector units busy instead of waiting on a Horner
//! chain.

const LOG2E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
// 1.5·2^52: adding it rounds to the nearest integer and leaves that integer
// in the low mantissa bits.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

const C: [f64; 13] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
    1.0 / 479001600.0,
];

#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    let x = x.clamp(-708.0, 708.0);
    let shifted = x * LOG2E + ROUND_MAGIC;
    let n = shifted - ROUND_MAGIC;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let p01 = C[0] + C[1] * r;
    let p23 = C[2] + C[3] * r;
    let p45 = C[4] + C[5] * r;
    let p67 = C[6] + C[7] * r;
    let p89 = C[8] + C[9] * r;
    let p1011 = C[10] + C[11] * r;
    let low = p01 + r2 * p23;
    let mid = p45 + r2 * p67;
    let high = p89 + r2 * p1011 + r4 * C[12];
    let p = (low + r4 * mid) + r8 * high;
    let k = (shifted.to_bits() as i64).wrapping_sub(ROUND_MAGIC.to_bits() as i64);
    // Wrapping so that overflow-checked builds still vectorize.
    let scale = f64::from_bits((k.wrapping_add(1023) << 52) as u64);
    p * scale
}
