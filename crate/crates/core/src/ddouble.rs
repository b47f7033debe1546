//! Double-double floating point (about 106 significand bits).
//!
//! Only what the bound evaluations need: the four operations, natural and
//! binary logarithms, and an accurate `ln(1 - x)` for tiny `x`. Works without
//! `std` (no libm calls), so all transcendental pieces are series evaluations.

use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Serialize, Serializer};

#[derive(Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

/// `2^k` for exponents in the normal range.
#[inline]
fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((1023 + k) as u64) << 52)
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    /// ln 2 to double-double precision.
    pub const LN2: DoubleDouble = DoubleDouble {
        hi: f64::from_bits(0x3FE6_2E42_FEFA_39EF),
        lo: f64::from_bits(0x3C7A_BC9E_3B39_803F),
    };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub const fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    /// Exact for `|x| < 2^106`.
    pub fn from_u128(x: u128) -> Self {
        let hi = x as f64;
        // `hi` may round above `x`; the signed remainder is small enough
        // to be exact in an f64 whenever x < 2^106.
        let diff = if (hi as u128) >= x {
            -(((hi as u128) - x) as f64)
        } else {
            (x - hi as u128) as f64
        };
        DoubleDouble::new(hi, diff)
    }

    pub fn from_u64(x: u64) -> Self {
        Self::from_u128(x as u128)
    }

    pub fn from_i64(x: i64) -> Self {
        if x < 0 {
            -Self::from_u128(x.unsigned_abs() as u128)
        } else {
            Self::from_u128(x as u128)
        }
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn to_f64(&self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn abs(self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self
        }
    }

    pub fn mul_pow2(self, k: i32) -> Self {
        let p = pow2(k);
        DoubleDouble {
            hi: self.hi * p,
            lo: self.lo * p,
        }
    }

    /// Smallest integer not below `self`, for magnitudes below 2^62.
    pub fn ceil(self) -> i64 {
        // truncation toward zero leaves a remainder in (-1, 1)
        let t = self.hi as i64;
        let frac = DoubleDouble::new(self.hi - t as f64, self.lo);
        if frac > DoubleDouble::ZERO {
            t + 1
        } else {
            t
        }
    }

    /// `atanh(z)` for `|z| <= 0.35`.
    fn atanh_small(z: DoubleDouble) -> DoubleDouble {
        let z2 = z * z;
        let mut power = z;
        let mut sum = z;
        let mut k = 1u32;
        loop {
            power = power * z2;
            let term = power / DoubleDouble::from_f64((2 * k + 1) as f64);
            sum = sum + term;
            if term.hi.abs() <= 1e-34 * sum.hi.abs() || k > 200 {
                break;
            }
            k += 1;
        }
        sum
    }

    /// Natural logarithm of a positive value.
    pub fn ln(self) -> DoubleDouble {
        assert!(self.hi > 0.0, "ln of non-positive value");
        // self = 2^e * y with y in [sqrt(1/2), sqrt(2))
        let bits = self.hi.to_bits();
        let mut e = ((bits >> 52) & 0x7ff) as i32 - 1023;
        let mut y = self.mul_pow2(-e);
        if y.hi > core::f64::consts::SQRT_2 {
            y = y.mul_pow2(-1);
            e += 1;
        }
        let z = (y - DoubleDouble::ONE) / (y + DoubleDouble::ONE);
        let ln_y = DoubleDouble::atanh_small(z).mul_pow2(1);
        DoubleDouble::LN2 * DoubleDouble::from_i64(e as i64) + ln_y
    }

    pub fn log2(self) -> DoubleDouble {
        self.ln() / DoubleDouble::LN2
    }

    /// `log2(n)`, exact when `n` is a power of two.
    pub fn log2_u64(n: u64) -> DoubleDouble {
        assert!(n > 0, "log2 of zero");
        if n.is_power_of_two() {
            DoubleDouble::from_u64(n.trailing_zeros() as u64)
        } else {
            DoubleDouble::from_u64(n).log2()
        }
    }

    /// `ln(1 - x)` for `0 <= x < 1`, accurate for tiny `x`:
    /// `ln(1 - x) = -2 atanh(x / (2 - x))`.
    pub fn ln_one_minus(x: DoubleDouble) -> DoubleDouble {
        assert!(!x.is_negative() && x.hi < 1.0, "ln(1-x) needs 0 <= x < 1");
        let z = x / (DoubleDouble::from_f64(2.0) - x);
        -DoubleDouble::atanh_small(z).mul_pow2(1)
    }

    /// `log2(1 - 2^-m)` for `m >= 1`; exactly `-1` at `m = 1`.
    pub fn log2_one_minus_pow2(m: u32) -> DoubleDouble {
        assert!((1..=1000).contains(&m), "exponent out of range");
        if m == 1 {
            return -DoubleDouble::ONE;
        }
        DoubleDouble::ln_one_minus(DoubleDouble::ONE.mul_pow2(-(m as i32))) / DoubleDouble::LN2
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;
    fn add(self, b: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = DoubleDouble;
    fn neg(self) -> DoubleDouble {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for DoubleDouble {
    type Output = DoubleDouble;
    fn sub(self, b: DoubleDouble) -> DoubleDouble {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = DoubleDouble;
    fn mul(self, b: DoubleDouble) -> DoubleDouble {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = DoubleDouble;
    fn div(self, b: DoubleDouble) -> DoubleDouble {
        let q1 = self.hi / b.hi;
        let r = self - b * DoubleDouble::from_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * DoubleDouble::from_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        DoubleDouble { hi, lo } + DoubleDouble::from_f64(q3)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            ord => Some(ord),
        }
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f64(), f)
    }
}

impl Serialize for DoubleDouble {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DoubleDouble, b: DoubleDouble, tol: f64) -> bool {
        (a - b).abs().to_f64() <= tol
    }

    #[test]
    fn integers_are_exact() {
        let big = (1u128 << 100) + 12345;
        let d = DoubleDouble::from_u128(big);
        assert_eq!(d.hi as u128 + (d.lo as i128) as u128, big);
        let s = DoubleDouble::from_u128(1 << 90) + DoubleDouble::ONE - DoubleDouble::from_u128(1 << 90);
        assert_eq!(s, DoubleDouble::ONE);
    }

    #[test]
    fn ln_known_values() {
        assert!(close(DoubleDouble::from_f64(2.0).ln(), DoubleDouble::LN2, 1e-31));
        assert!(close(DoubleDouble::ONE.ln(), DoubleDouble::ZERO, 1e-32));
        assert!(close(
            DoubleDouble::from_u64(1024).log2(),
            DoubleDouble::from_u64(10),
            1e-29
        ));
        // log2(3) = 1.584962500721156181453738943947816508759814407692481060455...
        let l3 = DoubleDouble::from_u64(3).log2();
        let want = DoubleDouble::new(1.584962500721156, 1.0579781240112554e-16);
        assert!(close(l3, want, 1e-30), "{l3:?}");
    }

    #[test]
    fn ln_one_minus_matches_direct_route() {
        // ln(1 - 1/2) = -ln 2
        assert!(close(
            DoubleDouble::ln_one_minus(DoubleDouble::from_f64(0.5)),
            -DoubleDouble::LN2,
            1e-31
        ));
        // moderate x: both routes agree
        let x = DoubleDouble::from_f64(0.125);
        let direct = (DoubleDouble::ONE - x).ln();
        assert!(close(DoubleDouble::ln_one_minus(x), direct, 1e-31));
        // tiny x: -x - x^2/2 dominates
        let tiny = DoubleDouble::ONE.mul_pow2(-60);
        let approx = -tiny - (tiny * tiny).mul_pow2(-1);
        let got = DoubleDouble::ln_one_minus(tiny);
        assert!(((got - approx) / approx).abs().to_f64() < 1e-30);
    }

    #[test]
    fn division_and_ceil() {
        let third = DoubleDouble::ONE / DoubleDouble::from_f64(3.0);
        assert!(close(third * DoubleDouble::from_f64(3.0), DoubleDouble::ONE, 1e-31));
        assert_eq!(DoubleDouble::from_u64(3456).ceil(), 3456);
        assert_eq!(DoubleDouble::new(3456.0, 1e-20).ceil(), 3457);
        assert_eq!(DoubleDouble::new(3456.0, -1e-20).ceil(), 3456);
        assert_eq!(DoubleDouble::from_f64(2.5).ceil(), 3);
        assert_eq!(DoubleDouble::from_f64(-2.5).ceil(), -2);
    }
}
