//! Parameterized small-float formats and their decoding into the
//! sign / exponent-index / integer-mantissa form fed to the accumulator.
//!
//! A decoded finite value is always `sign * mantissa * 2^(index - bias - nm)`.
//! Subnormals are given index 1 and no hidden bit so the same formula holds
//! for every finite code.

use std::fmt;

use crate::error::{Error, Result};
use crate::exact::ExactValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Sign {
    #[default]
    Positive,
    Negative,
}

impl Sign {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn is_negative(self) -> bool {
        self == Sign::Negative
    }

    /// Sign of a product.
    pub fn xor(self, other: Sign) -> Sign {
        Sign::from_bit(self.is_negative() ^ other.is_negative())
    }
}

/// Number in the `m * 2^e` form consumed by the accumulator.
///
/// `index` is a non-negative storage index; the true binary scale is
/// `index + value_scale` where `value_scale` is owned by whoever configured the
/// accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Decoded {
    pub sign: Sign,
    pub index: u32,
    pub mantissa: u64,
    pub is_zero: bool,
}

impl Decoded {
    pub fn zero() -> Self {
        Decoded {
            is_zero: true,
            ..Default::default()
        }
    }

    pub fn new(sign: Sign, index: u32, mantissa: u64) -> Self {
        Decoded {
            sign,
            index,
            mantissa,
            is_zero: mantissa == 0,
        }
    }

    /// `sign * mantissa * 2^(index + scale)` as an exact value.
    pub fn to_exact(&self, scale: i64) -> ExactValue {
        if self.is_zero {
            return ExactValue::zero();
        }
        ExactValue::from_parts(self.sign, self.mantissa, self.index as i64 + scale)
    }
}

/// Which exponent/fraction patterns are reserved for non-finite values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Specials {
    /// All-ones exponent field is Inf (zero fraction) or NaN.
    Ieee,
    /// Only the all-ones exponent with all-ones fraction is NaN; no Inf (OCP E4M3).
    NanOnlyAllOnes,
    /// Every code is finite.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NonfinitePolicy {
    /// Decoding a stream stops at the first nonfinite code.
    #[default]
    Error,
    /// Nonfinite codes are skipped and their offsets reported.
    RejectWithFlag,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FloatFormat {
    pub name: String,
    pub ne: u32,
    pub nm: u32,
    pub bias: i32,
    pub specials: Specials,
    pub nonfinite_policy: NonfinitePolicy,
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FloatFormat {
    pub fn new(name: &str, ne: u32, nm: u32, bias: i32, specials: Specials) -> Result<Self> {
        if ne < 2 || nm < 1 || 1 + ne + nm > 64 {
            return Err(Error::InvalidFormat(format!(
                "{name}: need ne >= 2, nm >= 1 and 1 + ne + nm <= 64 (got ne={ne}, nm={nm})"
            )));
        }
        Ok(FloatFormat {
            name: name.to_string(),
            ne,
            nm,
            bias,
            specials,
            nonfinite_policy: NonfinitePolicy::Error,
        })
    }

    /// IEEE-style format with the conventional bias `2^(ne-1) - 1`.
    pub fn ieee_like(name: &str, ne: u32, nm: u32) -> Result<Self> {
        Self::new(name, ne, nm, (1i32 << (ne - 1)) - 1, Specials::Ieee)
    }

    pub fn fp32() -> Self {
        Self::ieee_like("fp32", 8, 23).unwrap()
    }

    pub fn bf16() -> Self {
        Self::ieee_like("bf16", 8, 7).unwrap()
    }

    pub fn fp16() -> Self {
        Self::ieee_like("fp16", 5, 10).unwrap()
    }

    pub fn e5m2() -> Self {
        Self::ieee_like("e5m2", 5, 2).unwrap()
    }

    pub fn e4m3() -> Self {
        Self::new("e4m3", 4, 3, 7, Specials::NanOnlyAllOnes).unwrap()
    }

    /// IEEE-like with bias 3; only (ne, nm) are fixed by convention.
    pub fn e3m4() -> Self {
        Self::ieee_like("e3m4", 3, 4).unwrap()
    }

    pub fn builtins() -> Vec<FloatFormat> {
        vec![
            Self::fp32(),
            Self::bf16(),
            Self::fp16(),
            Self::e5m2(),
            Self::e4m3(),
            Self::e3m4(),
        ]
    }

    pub fn by_name(name: &str) -> Option<FloatFormat> {
        let n = name.to_ascii_lowercase();
        let f = match n.as_str() {
            "fp32" | "f32" => Self::fp32(),
            "bf16" | "bfloat16" => Self::bf16(),
            "fp16" | "f16" => Self::fp16(),
            "e5m2" | "fp8e5m2" => Self::e5m2(),
            "e4m3" | "fp8e4m3" => Self::e4m3(),
            "e3m4" | "fp8e3m4" => Self::e3m4(),
            _ => return None,
        };
        Some(f)
    }

    pub fn with_policy(mut self, policy: NonfinitePolicy) -> Self {
        self.nonfinite_policy = policy;
        self
    }

    pub fn width(&self) -> u32 {
        1 + self.ne + self.nm
    }

    /// Bytes per code in a little-endian stream.
    pub fn byte_width(&self) -> usize {
        self.width().div_ceil(8) as usize
    }

    pub fn max_index(&self) -> u32 {
        (1u32 << self.ne) - 1
    }

    /// Scale correction such that value = sign * mantissa * 2^(index + value_scale).
    pub fn value_scale(&self) -> i64 {
        -(self.bias as i64) - self.nm as i64
    }

    fn frac_mask(&self) -> u64 {
        (1u64 << self.nm) - 1
    }

    pub fn is_nonfinite(&self, code: u64) -> bool {
        let exp = (code >> self.nm) & ((1u64 << self.ne) - 1);
        let frac = code & self.frac_mask();
        let all_ones = (1u64 << self.ne) - 1;
        match self.specials {
            Specials::Ieee => exp == all_ones,
            Specials::NanOnlyAllOnes => exp == all_ones && frac == self.frac_mask(),
            Specials::None => false,
        }
    }

    pub fn decode(&self, code: u64) -> Result<Decoded> {
        decode_float(self, code)
    }

    /// Decodes a stream of codes honoring the nonfinite policy.
    pub fn decode_stream(&self, codes: &[u64]) -> Result<DecodedStream> {
        let mut out = DecodedStream::default();
        out.values.reserve(codes.len());
        for (offset, &code) in codes.iter().enumerate() {
            match decode_float(self, code) {
                Ok(d) => out.values.push(d),
                Err(Error::Nonfinite { .. })
                    if self.nonfinite_policy == NonfinitePolicy::RejectWithFlag =>
                {
                    out.rejected.push(offset)
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    pub fn to_exact(&self, d: &Decoded) -> ExactValue {
        d.to_exact(self.value_scale())
    }

    /// Encodes an `f64` whose value is exactly representable in this format.
    pub fn encode_f64(&self, x: f64) -> Result<u64> {
        if !x.is_finite() {
            return Err(Error::Unencodable(format!("{x} is not finite")));
        }
        let sign = Sign::from_bit(x.is_sign_negative());
        if x == 0.0 {
            return encode_float(self, sign, 0, 0);
        }
        let (mut mant, mut exp) = f64_parts(x.abs());
        // mant odd; value = mant * 2^exp; find index with mantissa = mant << s
        let top = 63 - mant.leading_zeros() as i64;
        // normal: mantissa has nm+1 bits, so exponent of the mantissa lsb is index - bias - nm
        let mut index = exp + top + self.bias as i64;
        if index < 1 {
            index = 1;
        }
        let lsb_exp = index - self.bias as i64 - self.nm as i64;
        if exp < lsb_exp {
            return Err(Error::Unencodable(format!("{x} needs more fraction bits than {self}")));
        }
        let s = exp - lsb_exp;
        if s + top > self.nm as i64 {
            return Err(Error::Unencodable(format!("{x} out of range for {self}")));
        }
        mant <<= s;
        exp -= s;
        debug_assert_eq!(exp, lsb_exp);
        if index > self.max_index() as i64 {
            return Err(Error::Unencodable(format!("{x} out of range for {self}")));
        }
        encode_float(self, sign, index as u32, mant)
    }
}

/// Result of decoding a stream under a [`NonfinitePolicy`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodedStream {
    pub values: Vec<Decoded>,
    /// Offsets of skipped nonfinite codes.
    pub rejected: Vec<usize>,
}

/// Splits a positive finite f64 into (odd mantissa, exponent).
pub(crate) fn f64_parts(x: f64) -> (u64, i64) {
    let bits = x.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp_field == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_field - 1075)
    };
    if m == 0 {
        return (0, 0);
    }
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i64;
    (m, e)
}

pub fn decode_float(fmt: &FloatFormat, code: u64) -> Result<Decoded> {
    let width = fmt.width();
    if width < 64 && code >> width != 0 {
        return Err(Error::CodeOutOfRange { code, width });
    }
    if fmt.is_nonfinite(code) {
        return Err(Error::Nonfinite {
            code,
            format: fmt.name.clone(),
        });
    }
    let sign = Sign::from_bit((code >> (fmt.ne + fmt.nm)) & 1 == 1);
    let exp = ((code >> fmt.nm) & ((1u64 << fmt.ne) - 1)) as u32;
    let frac = code & fmt.frac_mask();
    let d = match (exp, frac) {
        (0, 0) => Decoded {
            sign,
            index: 0,
            mantissa: 0,
            is_zero: true,
        },
        (0, f) => Decoded {
            sign,
            index: 1,
            mantissa: f,
            is_zero: false,
        },
        (e, f) => Decoded {
            sign,
            index: e,
            mantissa: f | (1u64 << fmt.nm),
            is_zero: false,
        },
    };
    Ok(d)
}

pub fn encode_float(fmt: &FloatFormat, sign: Sign, index: u32, mantissa: u64) -> Result<u64> {
    let sign_bit = (sign.is_negative() as u64) << (fmt.ne + fmt.nm);
    let hidden = 1u64 << fmt.nm;
    let exp_field = if mantissa == 0 {
        if index != 0 {
            return Err(Error::Unencodable(format!(
                "zero mantissa with index {index} in {fmt}"
            )));
        }
        0
    } else if index == 0 || index > fmt.max_index() {
        return Err(Error::IndexOutOfRange {
            index,
            index_bits: fmt.ne,
        });
    } else if mantissa < hidden {
        if index != 1 {
            return Err(Error::Unencodable(format!(
                "subnormal mantissa {mantissa:#x} requires index 1, got {index}"
            )));
        }
        0
    } else if mantissa < hidden << 1 {
        index as u64
    } else {
        return Err(Error::MantissaOutOfRange {
            mantissa,
            bits: fmt.nm + 1,
        });
    };
    let code = sign_bit | (exp_field << fmt.nm) | (mantissa & fmt.frac_mask());
    if fmt.is_nonfinite(code) {
        return Err(Error::Unencodable(format!(
            "index {index}, mantissa {mantissa:#x} is a nonfinite code in {fmt}"
        )));
    }
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_traits::{One, Zero};

    #[test]
    fn builtin_parameters() {
        let expect = [
            ("fp32", 8, 23, 127),
            ("bf16", 8, 7, 127),
            ("fp16", 5, 10, 15),
            ("e5m2", 5, 2, 15),
            ("e4m3", 4, 3, 7),
            ("e3m4", 3, 4, 3),
        ];
        for (f, (name, ne, nm, bias)) in FloatFormat::builtins().iter().zip(expect) {
            assert_eq!((f.name.as_str(), f.ne, f.nm, f.bias), (name, ne, nm, bias));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(FloatFormat::ieee_like("x", 1, 3).is_err());
        assert!(FloatFormat::ieee_like("x", 3, 0).is_err());
        assert!(FloatFormat::ieee_like("x", 11, 53).is_err());
        assert!(FloatFormat::ieee_like("f64", 11, 52).is_ok());
    }

    #[test]
    fn decode_examples() {
        let bf = FloatFormat::bf16();
        assert_eq!(bf.decode(0x3F80).unwrap(), Decoded::new(Sign::Positive, 127, 128));
        assert!(bf.decode(0x0000).unwrap().is_zero);
        assert!(bf.decode(0x8000).unwrap().is_zero);
        let sub = bf.decode(0x0001).unwrap();
        assert_eq!(sub, Decoded::new(Sign::Positive, 1, 1));
        assert_eq!(bf.to_exact(&sub), ExactValue::pow2(-133));
        let e4 = FloatFormat::e4m3();
        assert_eq!(e4.decode(0x38).unwrap(), Decoded::new(Sign::Positive, 7, 8));
        assert_eq!(e4.to_exact(&e4.decode(0x38).unwrap()), ExactValue::from_i64(1));
    }

    #[test]
    fn smallest_subnormal_matches_f32_reference() {
        // bf16 0x0001 is the upper half of f32 0x0001_0000
        let x = f32::from_bits(0x0001_0000) as f64;
        assert_eq!(x, 2f64.powi(-133));
    }

    #[test]
    fn nonfinite_codes() {
        let bf = FloatFormat::bf16();
        assert!(matches!(bf.decode(0x7F80), Err(Error::Nonfinite { .. })));
        assert!(matches!(bf.decode(0xFFC1), Err(Error::Nonfinite { .. })));
        let e4 = FloatFormat::e4m3();
        assert!(e4.decode(0x7F).is_err());
        assert!(e4.decode(0xFF).is_err());
        // S.1111.110 is the largest finite E4M3 value, 448
        let d = e4.decode(0x7E).unwrap();
        assert_eq!(e4.to_exact(&d), ExactValue::from_i64(448));
        assert!(FloatFormat::e5m2().decode(0x7C).is_err());
        assert!(bf.decode(0x1_0000).is_err());
    }

    #[test]
    fn encode_examples() {
        assert_eq!(
            encode_float(&FloatFormat::bf16(), Sign::Positive, 127, 128).unwrap(),
            0x3F80
        );
        assert_eq!(
            encode_float(&FloatFormat::e4m3(), Sign::Negative, 7, 8).unwrap(),
            0xB8
        );
        let e4 = FloatFormat::e4m3();
        assert!(encode_float(&e4, Sign::Positive, 15, 15).is_err());
        assert!(encode_float(&e4, Sign::Positive, 16, 8).is_err());
        assert!(encode_float(&e4, Sign::Positive, 3, 16).is_err());
        assert!(encode_float(&e4, Sign::Positive, 2, 3).is_err());
    }

    #[test]
    fn stream_policy() {
        let bf = FloatFormat::bf16();
        let codes = [0x3F80, 0x7F80, 0x4000];
        assert!(bf.decode_stream(&codes).is_err());
        let lenient = bf.with_policy(NonfinitePolicy::RejectWithFlag);
        let s = lenient.decode_stream(&codes).unwrap();
        assert_eq!(s.values.len(), 2);
        assert_eq!(s.rejected, vec![1]);
    }

    #[test]
    fn encode_f64_exact_only() {
        let bf = FloatFormat::bf16();
        assert_eq!(bf.encode_f64(1.0).unwrap(), 0x3F80);
        assert_eq!(bf.encode_f64(-2.0).unwrap(), 0xC000);
        assert_eq!(bf.encode_f64(1.5).unwrap(), 0x3FC0);
        assert_eq!(bf.encode_f64(2f64.powi(-133)).unwrap(), 0x0001);
        assert!(bf.encode_f64(1.0 + 2f64.powi(-8)).is_err());
        assert!(bf.encode_f64(2f64.powi(128)).is_err());
        assert_eq!(FloatFormat::e4m3().encode_f64(448.0).unwrap(), 0x7E);
        assert!(FloatFormat::e4m3().encode_f64(480.0).is_err());
    }

    /// Bit-field reference: (-1)^s * 2^(E - bias) * (1 + F/2^nm), subnormals 2^(1-bias) * F/2^nm,
    /// as an exact rational num / 2^den_pow.
    fn reference_rational(fmt: &FloatFormat, code: u64) -> (BigInt, i64) {
        let s = (code >> (fmt.ne + fmt.nm)) & 1;
        let e = ((code >> fmt.nm) & ((1 << fmt.ne) - 1)) as i64;
        let f = BigInt::from(code & ((1 << fmt.nm) - 1));
        let one = BigInt::one() << fmt.nm;
        let (sig, exp) = if e == 0 {
            (f, 1 - fmt.bias as i64)
        } else {
            (one + f, e - fmt.bias as i64)
        };
        let sig = if s == 1 { -sig } else { sig };
        (sig, exp - fmt.nm as i64)
    }

    #[test]
    fn exhaustive_small_formats() {
        for fmt in FloatFormat::builtins().into_iter().filter(|f| f.width() <= 16) {
            let mut finite = 0usize;
            for code in 0..(1u64 << fmt.width()) {
                match fmt.decode(code) {
                    Ok(d) => {
                        finite += 1;
                        assert!(!fmt.is_nonfinite(code));
                        let back = encode_float(&fmt, d.sign, d.index, d.mantissa).unwrap();
                        assert_eq!(back, code, "{fmt} code {code:#x}");
                        if d.is_zero {
                            assert_eq!(d.mantissa, 0);
                        } else if d.mantissa >= 1 << fmt.nm {
                            assert!(d.index >= 1 && d.mantissa < 1 << (fmt.nm + 1));
                        } else {
                            assert_eq!(d.index, 1);
                        }
                        if fmt.width() == 8 {
                            let (sig, e) = reference_rational(&fmt, code);
                            let reference = if sig.is_zero() {
                                ExactValue::zero()
                            } else {
                                ExactValue::new(sig, e)
                            };
                            assert_eq!(fmt.to_exact(&d), reference, "{fmt} code {code:#x}");
                        }
                    }
                    Err(Error::Nonfinite { .. }) => assert!(fmt.is_nonfinite(code)),
                    Err(e) => panic!("{e}"),
                }
            }
            let nonfinite = match fmt.name.as_str() {
                "e4m3" => 2,
                _ => 2 << fmt.nm,
            };
            assert_eq!(finite, (1 << fmt.width()) - nonfinite, "{fmt}");
        }
    }
}
