//! Exact results: an arbitrary-precision signed significand times a power of two.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::formats::{f64_parts, Sign};

/// `significand * 2^pow2`, kept canonical: the significand is odd, or the
/// value is `(0, 0)`. Derived equality is therefore value equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactValue {
    significand: BigInt,
    pow2: i64,
}

impl ExactValue {
    pub fn new(significand: BigInt, pow2: i64) -> Self {
        let mut v = ExactValue { significand, pow2 };
        v.canonicalize();
        v
    }

    pub fn zero() -> Self {
        ExactValue::default()
    }

    pub fn from_i64(v: i64) -> Self {
        Self::new(BigInt::from(v), 0)
    }

    pub fn pow2(p: i64) -> Self {
        Self::new(BigInt::one(), p)
    }

    pub fn from_parts(sign: Sign, magnitude: u64, pow2: i64) -> Self {
        let m = BigInt::from(magnitude);
        Self::new(if sign.is_negative() { -m } else { m }, pow2)
    }

    /// Exact conversion; `None` for non-finite input.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let (m, e) = f64_parts(x.abs());
        let sign = Sign::from_bit(x < 0.0);
        Some(Self::from_parts(sign, m, e))
    }

    fn canonicalize(&mut self) {
        if self.significand.is_zero() {
            self.pow2 = 0;
            return;
        }
        let tz = self.significand.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.significand >>= tz;
            self.pow2 += tz as i64;
        }
    }

    pub fn significand(&self) -> &BigInt {
        &self.significand
    }

    pub fn exponent(&self) -> i64 {
        self.pow2
    }

    pub fn is_zero(&self) -> bool {
        self.significand.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.significand.is_negative()
    }

    pub fn abs(&self) -> Self {
        ExactValue {
            significand: self.significand.abs(),
            pow2: self.pow2,
        }
    }

    /// Scales by `2^p` exactly.
    pub fn scale_pow2(&self, p: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        ExactValue {
            significand: self.significand.clone(),
            pow2: self.pow2 + p,
        }
    }

    pub fn mul(&self, other: &ExactValue) -> ExactValue {
        ExactValue::new(&self.significand * &other.significand, self.pow2 + other.pow2)
    }

    /// Nearest `f64`, ties to even. Overflows to infinity, underflows through
    /// subnormals to zero.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let neg = self.is_negative();
        let mag = self.significand.magnitude();
        let bits = mag.bits() as i64;
        // exponent of the leading bit
        let lead = self.pow2 + bits - 1;
        if lead > 1023 {
            return if neg { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        // number of significand bits that survive: 53 for normals, fewer below 2^-1022
        let keep = if lead >= -1022 { 53 } else { 53 - (-1022 - lead) };
        if keep <= 0 {
            // below half the smallest subnormal, or exactly representable rounding to it
            let half_min = -1075;
            let r = if lead > half_min || (lead == half_min && bits > 1) {
                f64::from_bits(1)
            } else {
                0.0
            };
            return if neg { -r } else { r };
        }
        let drop = bits - keep;
        let (mut q, e) = if drop > 0 {
            let q: BigUint = mag >> drop as u64;
            let rem: BigUint = mag - (&q << drop as u64);
            let half: BigUint = BigUint::one() << (drop - 1) as u64;
            let mut q = q;
            match rem.cmp(&half) {
                Ordering::Greater => q += 1u32,
                Ordering::Equal if q.is_odd() => q += 1u32,
                _ => {}
            }
            (q, self.pow2 + drop)
        } else {
            (mag.clone(), self.pow2)
        };
        // q < 2^54 here; 2^e may itself be out of f64 range while the product is not
        let mut e = e;
        while q.bits() > 53 {
            q >>= 1u32;
            e += 1;
        }
        let q = q.to_u64().unwrap() as f64;
        let r = mul_pow2(q, e);
        if neg {
            -r
        } else {
            r
        }
    }

    /// Scientific notation with `digits` significant decimal digits
    /// (round half to even on the exact value).
    pub fn to_decimal(&self, digits: usize) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let digits = digits.max(1);
        // value = n / 10^d exactly
        let mag = self.significand.magnitude().clone();
        let (n, d): (BigUint, i64) = if self.pow2 >= 0 {
            (mag << self.pow2 as u64, 0)
        } else {
            let p = (-self.pow2) as u32;
            (mag * BigUint::from(5u32).pow(p), p as i64)
        };
        let s = n.to_str_radix(10);
        let len = s.len();
        let (mut head, exp10) = if len > digits {
            let cut = len - digits;
            let div = BigUint::from(10u32).pow(cut as u32);
            let (mut q, r) = n.div_rem(&div);
            let twice = r << 1u32;
            match twice.cmp(&div) {
                Ordering::Greater => q += 1u32,
                Ordering::Equal if q.is_odd() => q += 1u32,
                _ => {}
            }
            (q.to_str_radix(10), len as i64 - 1 - d)
        } else {
            (s, len as i64 - 1 - d)
        };
        let mut exp10 = exp10;
        if head.len() > digits {
            // rounding carried into a new digit (999.. -> 1000..)
            head.truncate(digits);
            exp10 += 1;
        }
        let sign = if self.is_negative() { "-" } else { "" };
        let (first, rest) = head.split_at(1);
        let rest = rest.trim_end_matches('0');
        if rest.is_empty() {
            format!("{sign}{first}e{exp10}")
        } else {
            format!("{sign}{first}.{rest}e{exp10}")
        }
    }
}

fn mul_pow2(x: f64, e: i64) -> f64 {
    let mut r = x;
    let mut e = e;
    // split the scaling so intermediate powers stay finite and exact
    while e > 1000 {
        r *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        r *= 2f64.powi(-1000);
        e += 1000;
    }
    r * 2f64.powi(e as i32)
}

impl fmt::Display for ExactValue {
    /// `<sign><hex significand> * 2^<pow2>`, zero as `0 * 2^0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.significand.sign() {
            BigSign::NoSign => write!(f, "0 * 2^0"),
            s => write!(
                f,
                "{}{} * 2^{}",
                if s == BigSign::Minus { '-' } else { '+' },
                self.significand.magnitude().to_str_radix(16),
                self.pow2
            ),
        }
    }
}

impl std::str::FromStr for ExactValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (sig, exp) = s
            .split_once("* 2^")
            .ok_or_else(|| format!("expected '<sig> * 2^<exp>', got {s:?}"))?;
        let sig = sig.trim();
        let (neg, hex) = match sig.as_bytes().first() {
            Some(b'-') => (true, &sig[1..]),
            Some(b'+') => (false, &sig[1..]),
            _ => (false, sig),
        };
        let mag = BigInt::parse_bytes(hex.as_bytes(), 16).ok_or("bad hex significand")?;
        let pow2: i64 = exp.trim().parse().map_err(|e| format!("bad exponent: {e}"))?;
        Ok(ExactValue::new(if neg { -mag } else { mag }, pow2))
    }
}

impl Add for &ExactValue {
    type Output = ExactValue;

    fn add(self, rhs: &ExactValue) -> ExactValue {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let p = self.pow2.min(rhs.pow2);
        let a = &self.significand << (self.pow2 - p) as u64;
        let b = &rhs.significand << (rhs.pow2 - p) as u64;
        ExactValue::new(a + b, p)
    }
}

impl Add for ExactValue {
    type Output = ExactValue;

    fn add(self, rhs: ExactValue) -> ExactValue {
        &self + &rhs
    }
}

impl Neg for ExactValue {
    type Output = ExactValue;

    fn neg(self) -> ExactValue {
        ExactValue {
            significand: -self.significand,
            pow2: self.pow2,
        }
    }
}

impl Sub for &ExactValue {
    type Output = ExactValue;

    fn sub(self, rhs: &ExactValue) -> ExactValue {
        self + &(-rhs.clone())
    }
}

impl std::iter::Sum for ExactValue {
    fn sum<I: Iterator<Item = ExactValue>>(iter: I) -> Self {
        iter.fold(ExactValue::zero(), |a, b| &a + &b)
    }
}

impl PartialOrd for ExactValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactValue {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self - other;
        d.significand.sign().cmp(&BigSign::NoSign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_form() {
        let v = ExactValue::new(BigInt::from(12), 3);
        assert_eq!(v.significand(), &BigInt::from(3));
        assert_eq!(v.exponent(), 5);
        assert_eq!(ExactValue::new(BigInt::zero(), 17), ExactValue::zero());
        assert_eq!(ExactValue::from_i64(2), ExactValue::pow2(1));
    }

    #[test]
    fn display_forms() {
        assert_eq!(ExactValue::from_i64(2).to_string(), "+1 * 2^1");
        assert_eq!(ExactValue::zero().to_string(), "0 * 2^0");
        assert_eq!(ExactValue::from_i64(3).to_string(), "+3 * 2^0");
        assert_eq!(ExactValue::new(BigInt::from(-129), -7).to_string(), "-81 * 2^-7");
        let v: ExactValue = "-81 * 2^-7".parse().unwrap();
        assert_eq!(v, ExactValue::new(BigInt::from(-129), -7));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(ExactValue::from_i64(3).to_decimal(20), "3e0");
        assert_eq!(ExactValue::new(BigInt::from(129), -7).to_decimal(20), "1.0078125e0");
        assert_eq!(ExactValue::from_i64(-1000).to_decimal(20), "-1e3");
        assert_eq!(ExactValue::pow2(-1).to_decimal(1), "5e-1");
        // 2^-133 = 9.183549615799121e-41
        assert!(ExactValue::pow2(-133).to_decimal(20).starts_with("9.1835496157991"));
        assert_eq!(ExactValue::from_i64(999_999).to_decimal(3), "1e6");
    }

    #[test]
    fn f64_conversion_edges() {
        assert_eq!(ExactValue::pow2(-1074).to_f64(), f64::from_bits(1));
        assert_eq!(ExactValue::pow2(-1076).to_f64(), 0.0);
        assert_eq!(ExactValue::pow2(1024).to_f64(), f64::INFINITY);
        assert_eq!(ExactValue::from_i64(-5).to_f64(), -5.0);
        // 2^53 + 1 ties to even
        let v = ExactValue::new((BigInt::one() << 53u32) + 1, 0);
        assert_eq!(v.to_f64(), 2f64.powi(53));
    }

    proptest! {
        #[test]
        fn f64_roundtrip(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let v = ExactValue::from_f64(x).unwrap();
            prop_assert_eq!(v.to_f64(), if x == 0.0 { 0.0 } else { x });
        }

        #[test]
        fn addition_matches_integers(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000, pa in -40i64..40, pb in -40i64..40) {
            let x = ExactValue::new(BigInt::from(a), pa);
            let y = ExactValue::new(BigInt::from(b), pb);
            let p = pa.min(pb);
            let expect = ExactValue::new((BigInt::from(a) << (pa - p) as u64) + (BigInt::from(b) << (pb - p) as u64), p);
            prop_assert_eq!(&x + &y, expect.clone());
            prop_assert_eq!(&(&x + &y) - &y, x);
        }
    }
}
