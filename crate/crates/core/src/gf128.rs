//! Arithmetic in GF(2^128) modulo `x^128 + x^7 + x^2 + x + 1`.
//!
//! Bit `i` of the `u128` representation is the coefficient of `x^i` (no bit reflection, unlike
//! GHASH). Byte encoding is little-endian.

use std::ops::{Add, AddAssign, Mul};

/// Low terms of the reduction polynomial: `x^7 + x^2 + x + 1`.
const POLY_LOW: u128 = 0x87;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Gf128(pub u128);

impl Gf128 {
    pub const ZERO: Gf128 = Gf128(0);
    pub const ONE: Gf128 = Gf128(1);

    pub fn to_le_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; 16]) -> Self {
        Gf128(u128::from_le_bytes(bytes))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// `self * x`.
    pub fn mul_x(self) -> Self {
        let carry = (self.0 >> 127) as u8;
        Gf128((self.0 << 1) ^ (POLY_LOW * carry as u128))
    }
}

impl Add for Gf128 {
    type Output = Gf128;
    fn add(self, rhs: Self) -> Self {
        Gf128(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf128 {
    fn add_assign(&mut self, rhs: Self) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf128 {
    type Output = Gf128;
    fn mul(self, rhs: Self) -> Self {
        let (lo, hi) = clmul(self.0, rhs.0);
        Gf128(reduce(lo, hi))
    }
}

/// Folds the high half of a 256-bit carry-less product back below degree 128.
fn reduce(lo: u128, hi: u128) -> u128 {
    let overflow = (hi >> 127) ^ (hi >> 126) ^ (hi >> 121);
    lo ^ hi ^ (hi << 1) ^ (hi << 2) ^ (hi << 7) ^ overflow ^ (overflow << 1) ^ (overflow << 2) ^ (overflow << 7)
}

fn clmul(a: u128, b: u128) -> (u128, u128) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("pclmulqdq") && std::arch::is_x86_feature_detected!("sse2") {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { clmul_x86(a, b) };
        }
    }
    clmul_portable(a, b)
}

/// Shift-and-xor carry-less multiplication returning `(low, high)` halves.
pub fn clmul_portable(a: u128, b: u128) -> (u128, u128) {
    let mut lo = 0u128;
    let mut hi = 0u128;
    for i in 0..128 {
        let mask = 0u128.wrapping_sub((b >> i) & 1);
        lo ^= (a << i) & mask;
        if i > 0 {
            hi ^= (a >> (128 - i)) & mask;
        }
    }
    (lo, hi)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "pclmulqdq,sse2")]
unsafe fn clmul_x86(a: u128, b: u128) -> (u128, u128) {
    use std::arch::x86_64::*;
    let x = _mm_set_epi64x((a >> 64) as i64, a as i64);
    let y = _mm_set_epi64x((b >> 64) as i64, b as i64);
    let ll = _mm_clmulepi64_si128(x, y, 0x00);
    let hh = _mm_clmulepi64_si128(x, y, 0x11);
    let lh = _mm_clmulepi64_si128(x, y, 0x10);
    let hl = _mm_clmulepi64_si128(x, y, 0x01);
    let mid = _mm_xor_si128(lh, hl);
    let to_u128 = |v: __m128i| -> u128 {
        let mut out = [0u8; 16];
        _mm_storeu_si128(out.as_mut_ptr() as *mut __m128i, v);
        u128::from_le_bytes(out)
    };
    let (ll, hh, mid) = (to_u128(ll), to_u128(hh), to_u128(mid));
    (ll ^ (mid << 64), hh ^ (mid >> 64))
}
