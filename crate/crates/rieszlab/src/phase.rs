//! Exact-enough phase reduction for integer frequencies of arbitrary size.
//!
//! Two situations arise. On a power-of-two grid of N nodes the phase of
//! `z^{-e}` at node m is `e*m/N mod 1`, so only `e mod N` matters and a big
//! integer mask gives it exactly; that path lives in [`reduce_mod_pow2`].
//! Off the grid, evaluating `cos(e*t0)` for a real `t0` and a huge integer
//! `e` needs `frac(e * t0 / (2*pi))` without catastrophic cancellation.
//! Multiplying first and reducing later is hopeless once `e` exceeds 2^53,
//! so [`PhaseReducer`] stores `t0/(2*pi)` as a fixed-point integer with
//! `FRAC_BITS` fractional bits and reduces the product `e * fp` modulo
//! 2^FRAC_BITS in integer arithmetic. The error in the final fraction is
//! below 2^(bits(e) - FRAC_BITS) plus one rounding ulp, which leaves more
//! than 250 guard bits for every height the configured caps admit.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::{Error, Result};

/// Fractional bits carried by the fixed-point representation of
/// `t0/(2*pi)`. Sized for exponents up to 8192 bits with slack: the
/// default height cap is 4096 bits and the largest standalone fixture
/// (4096 geometric columns) reaches about 6500 bits.
pub const FRAC_BITS: u64 = 8448;

/// 1/(2*pi) scaled by 2^FRAC_BITS, truncated toward zero. Generated once
/// with a 8800-bit binary evaluation of pi and checked against the f64
/// value in tests; regeneration recipe in the workspace README.
const INV_2PI_HEX: &str = concat!(
    "28be60db9391054a7f09d5f47d4d377036d8a5664f10e4107f9458eaf7aef158",
    "6dc91b8e909374b801924bba827464873f877ac72c4a69cfba208d7d4baed121",
    "3a671c09ad17df904e64758e60d4ce7d272117e2ef7e4a0ec7fe25fff7816603",
    "fbcbc462d6829b47db4d9fb3c9f2c26dd3d18fd9a797fa8b5d49eeb1faf97c5e",
    "cf41ce7de294a4ba9afed7ec47e357421580cc11bf1edaeafc33ef0826bd0d87",
    "6a78e45857b986c219666157c5281a10237ff620135cc9cc41818555b29cea32",
    "58389ef0231ad1f10670d9f3773a024aa0d6711da2e58729b76bd13455c6414f",
    "a97fc1c14fdf8cfa0cb0b793e60c9f6ef0cf49bbdac797be27ce87cd72bc9fc7",
    "61fc48641f1f091abe9bb55dcb4c10cec571852d674670f0b12b50534b174003",
    "119f618b5c78e6b1a6c0188cdf34ad25e9ed35554dfd8fb5c60428ff1d934aa7",
    "592af5dc3e1f18d5ec1eb9c545d5927036758ece2129f2c8c91de2b588d516ae",
    "47c006c2bc77f3867fcc67da87999855e651feeb361fdfadd948a27a0c982ff9",
    "b3713bc24d9b350fd775f785b78ed624a6f78a08b4ba218a1356388cb2b185b8",
    "c232df78143005e9c77cd6f8060d04cb9884a0c05220d6e3bd5fec2b7cba4790",
    "d29234d9c436376a9097ebb3985aa90a02ad2674fca9819fddd720f0a8e20f18",
    "5e1ce296a32bef75dbd8e98b72effd3be06359f0499172954db672b4aa0a2358",
    "709df24485098126d184b11671113172246c937cc5c02b50f539524a44357f7f",
    "2f80332507bbb39c3d4f84e03c7b30f9ecca3e31e50164cf9c706cc24bbcd142",
    "e704a21ec82ae7ed4bb0a491cbcc9edb55432429dc87f9dae5b2cc52859e789e",
    "506277fd25e53a2139b8a5cc665afb620d97d7c3bf6eed26921b2919d09c9c4c",
    "97636e0567c2796f094c634e5d3dc7014c0043035a0212d63b8b242a91c0b9dd",
    "0935af699f7ddc921bbbc5a7e9a523bda46d1454f47c82b3cce6081f92fd5a18",
    "ec97cfb740d7501fe2614a549570190dc4361b4c920c9d5316f51c539b951170",
    "4242da7d4ab559852741c9d4011776ceed315dba85fe61df5ad26e89c74a5a65",
    "ab333195052b5ab8a4227662141c8b2fa9012501dddc0c3cc9ff002a1c7a9270",
    "998f781920f765e5cfe8ff6510e3218377904c674e64a31c3779edc5cef7c20a",
    "cdc568201724e016a48444363a03ebe01b12fff6c3e40e1d8616456958aef2d8",
    "6e6271ef5004013cb489dd527dadbaeec8b6ea85028bc9a25da0d90ccec246a5",
    "03aa8e9470a8c76bbb6bc4899713709b671e8b65d5b020cfc0fdbc0263100ae6",
    "4c5b41ed0e45480316f0f63124bd52eb71a97293b34de9cdaa79a524aada10b7",
    "7798c67be31d94a2da0df6ff2ae86b8c4577e86b8036bec31993592dc17b4c19",
    "4a6fd595cebfd1ee7e5abcef9d77e4ca0c202afda3198572c10188be87793669",
    "2ccf63c6d5c2734dba5093a92f84ed48ccc6aabc2a1953e9707483cfc2f35e16",
);

fn inv_2pi_fixed() -> BigUint {
    BigUint::parse_bytes(INV_2PI_HEX.as_bytes(), 16).expect("embedded constant parses")
}

/// Residue `e mod 2^log2_n` as u64. Exact for any size of `e`.
pub fn reduce_mod_pow2(e: &BigUint, log2_n: u32) -> u64 {
    debug_assert!(log2_n <= 63);
    let mask = (1u64 << log2_n) - 1;
    // Only the lowest 64 bits participate in a power-of-two residue.
    let low = e.iter_u64_digits().next().unwrap_or(0);
    low & mask
}

/// Reduces phases `e * t0 / (2*pi) mod 1` for one fixed `t0`.
pub struct PhaseReducer {
    /// `t0/(2*pi)` with FRAC_BITS fractional bits.
    t0_fixed: BigUint,
    /// Same value truncated to 128 fractional bits, for the u64 fast path.
    t0_fixed_128: u128,
    t0: f64,
}

impl PhaseReducer {
    /// `t0` must be finite and nonnegative; values far beyond 2*pi are
    /// legal but pointless, so they are rejected as likely mistakes.
    pub fn new(t0: f64) -> Result<Self> {
        if !t0.is_finite() || t0 < 0.0 || t0 > 1e6 {
            return Err(Error::InvalidGrid(format!("evaluation point {t0} out of range")));
        }
        // t0 as an exact dyadic rational m * 2^exp, then
        // t0_fixed = round(m * inv2pi * 2^(FRAC_BITS + exp)).
        let (m, exp) = split_f64(t0);
        let raw = BigUint::from(m) * inv_2pi_fixed();
        let t0_fixed = if exp >= 0 { raw << (exp as u64) } else { round_shr(raw, (-exp) as u64) };
        let t0_fixed_128 = ((&t0_fixed >> (FRAC_BITS - 128)) % (BigUint::from(1u8) << 128u32))
            .to_u128()
            .expect("128 bits fit");
        Ok(PhaseReducer { t0_fixed, t0_fixed_128, t0 })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// `frac(e * t0 / (2*pi))` in [0, 1).
    pub fn frac(&self, e: &BigUint) -> f64 {
        if e.bits() + 256 > FRAC_BITS {
            // Out of designed precision; callers guard via the height cap,
            // so this is an internal contract violation, not user error.
            panic!("phase reduction asked for {}-bit exponent", e.bits());
        }
        if let Some(small) = e.to_u64() {
            return self.frac_u64(small);
        }
        let prod = e * &self.t0_fixed;
        let frac_part = prod % (BigUint::from(1u8) << FRAC_BITS);
        // Top 64 bits of the fractional part carry the full f64 precision.
        let top = (frac_part >> (FRAC_BITS - 64)).to_u64().expect("64 bits fit");
        top as f64 / 2f64.powi(64)
    }

    /// Fast path: e fits in u64, fixed point truncated to 128 bits.
    /// Error below 2^-63 in the fraction.
    fn frac_u64(&self, e: u64) -> f64 {
        let lo = self.t0_fixed_128 as u64 as u128;
        let hi = self.t0_fixed_128 >> 64;
        let e = e as u128;
        // (e * t0_fixed_128) mod 2^128; the shift discards integer bits.
        let frac128 = ((e * hi) << 64).wrapping_add(e * lo);
        let top = (frac128 >> 64) as u64;
        (top as f64 + ((frac128 as u64) as f64) / 2f64.powi(64)) / 2f64.powi(64)
    }

    /// `cos(e * t0)` through the reduced phase.
    pub fn cos(&self, e: &BigUint) -> f64 {
        (self.frac(e) * std::f64::consts::TAU).cos()
    }

    /// `cos(e * t0)` for u64 exponents; hot path for ensemble sampling.
    pub fn cos_u64(&self, e: u64) -> f64 {
        (self.frac_u64(e) * std::f64::consts::TAU).cos()
    }
}

/// Decomposes a finite positive f64 into (mantissa, exponent) with
/// value = mantissa * 2^exponent and mantissa an integer.
fn split_f64(x: f64) -> (u64, i64) {
    assert!(x.is_finite() && x >= 0.0);
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if raw_exp == 0 {
        (mantissa, -1074)
    } else {
        (mantissa | (1u64 << 52), raw_exp - 1075)
    }
}

/// `round(x / 2^shift)` to nearest, ties away from zero.
fn round_shr(x: BigUint, shift: u64) -> BigUint {
    if shift == 0 {
        return x;
    }
    let half = BigUint::from(1u8) << (shift - 1);
    (x + half) >> shift
}
