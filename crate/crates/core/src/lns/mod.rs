//! Logarithmic numbers `(-1)^s * 2^(ei.ef)`.
//!
//! A product of two log numbers is a fixed-point add of their exponents. The
//! fractional part of the sum indexes a small table holding `2^0.ef` as an
//! integer mantissa; from there on the accumulator is exact, so the table is
//! the only place precision is lost.

pub mod compression;

use num_bigint::BigUint;
use num_traits::One;

use crate::accumulator::{Accumulator, AccumulatorConfig, ReconstructionStrategy};
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::{Decoded, Sign};

pub use compression::{
    compress_weights, estimate_compression, parse_manifest, scale_matrix, CompressionEstimate,
    CompressionReport, MatrixSpan, Method,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ZeroPolicy {
    /// Code 0 is reserved for zero and skipped by the MAC.
    #[default]
    ReservedCode,
    /// No zero: code 0 is the smallest positive value, `2^0`.
    SmallestValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CastRounding {
    /// Nearest `ef` in the exponent domain.
    #[default]
    LogDomain,
    /// Nearest representable value in the linear domain.
    LinearDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LogFormat {
    pub n_ei: u32,
    pub n_ef: u32,
    pub lut_bits: u32,
    pub zero: ZeroPolicy,
    pub rounding: CastRounding,
}

impl LogFormat {
    pub fn new(n_ei: u32, n_ef: u32, lut_bits: u32) -> Result<Self> {
        if n_ei == 0 || n_ei > 8 || n_ef > 8 || !(2..=32).contains(&lut_bits) {
            return Err(Error::InvalidFormat(format!(
                "log{n_ei}.{n_ef} with {lut_bits}-bit table"
            )));
        }
        Ok(LogFormat {
            n_ei,
            n_ef,
            lut_bits,
            zero: ZeroPolicy::ReservedCode,
            rounding: CastRounding::LogDomain,
        })
    }

    /// 4 integer and 3 fractional exponent bits, 8-bit table.
    pub fn log43() -> Self {
        Self::new(4, 3, 8).unwrap()
    }

    pub fn with_zero_policy(mut self, zero: ZeroPolicy) -> Self {
        self.zero = zero;
        self
    }

    pub fn with_rounding(mut self, rounding: CastRounding) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn width(&self) -> u32 {
        1 + self.n_ei + self.n_ef
    }

    pub fn zero_code(&self) -> u64 {
        0
    }

    pub fn max_ei(&self) -> u32 {
        (1 << self.n_ei) - 1
    }

    pub fn lut(&self) -> Vec<u64> {
        build_lut(self)
    }

    pub fn decode(&self, code: u64) -> Result<LogDecoded> {
        if code >> self.width() != 0 {
            return Err(Error::CodeOutOfRange {
                code,
                width: self.width(),
            });
        }
        if code == self.zero_code() && self.zero == ZeroPolicy::ReservedCode {
            return Ok(LogDecoded::zero());
        }
        Ok(LogDecoded {
            sign: Sign::from_bit(code >> (self.n_ei + self.n_ef) == 1),
            ei: ((code >> self.n_ef) & ((1 << self.n_ei) - 1)) as u32,
            ef: (code & ((1 << self.n_ef) - 1)) as u32,
            is_zero: false,
        })
    }

    pub fn encode(&self, d: &LogDecoded) -> Result<u64> {
        if d.is_zero {
            return Ok(self.zero_code());
        }
        if d.ei > self.max_ei() || d.ef >> self.n_ef != 0 {
            return Err(Error::Unencodable(format!(
                "ei={} ef={} outside log{}.{}",
                d.ei, d.ef, self.n_ei, self.n_ef
            )));
        }
        let code = ((d.sign.is_negative() as u64) << (self.n_ei + self.n_ef))
            | ((d.ei as u64) << self.n_ef)
            | d.ef as u64;
        if code == self.zero_code() && self.zero == ZeroPolicy::ReservedCode {
            return Err(Error::Unencodable("+2^0 collides with the zero code".into()));
        }
        Ok(code)
    }

    /// Like [`Self::encode`], but a `+2^0` that would land on the reserved
    /// zero code takes the next code up, `+2^(1/2^n_ef)`.
    pub fn encode_nearest(&self, d: &LogDecoded) -> Result<u64> {
        match self.encode(d) {
            Err(_) if !d.is_zero && !d.sign.is_negative() && d.ei == 0 && d.ef == 0 => Ok(self.zero_code() + 1),
            r => r,
        }
    }

    /// Accumulator for summing log values directly (no multiply).
    pub fn sum_config(&self, k: u32, nv: u32) -> Result<AccumulatorConfig> {
        AccumulatorConfig::new(self.n_ei, k, nv, self.lut_bits - 1, -(self.lut_bits as i64 - 1))
    }

    /// Accumulator for products, whose integer exponent needs one more bit.
    pub fn mac_config(&self, k: u32, nv: u32) -> Result<AccumulatorConfig> {
        AccumulatorConfig::new(self.n_ei + 1, k, nv, self.lut_bits - 1, -(self.lut_bits as i64 - 1))
    }

    /// Table-quantized linear value of a decoded log number.
    pub fn to_exact(&self, d: &LogDecoded, lut: &[u64]) -> ExactValue {
        to_linear(d, lut).to_exact(-(self.lut_bits as i64 - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LogDecoded {
    pub sign: Sign,
    pub ei: u32,
    pub ef: u32,
    pub is_zero: bool,
}

impl LogDecoded {
    pub fn zero() -> Self {
        LogDecoded {
            is_zero: true,
            ..Default::default()
        }
    }

    pub fn new(sign: Sign, ei: u32, ef: u32) -> Self {
        LogDecoded {
            sign,
            ei,
            ef,
            is_zero: false,
        }
    }
}

/// `table[f] = round(2^(f / 2^n_ef) * 2^(lut_bits - 1))`, ties away from zero.
pub fn build_lut(fmt: &LogFormat) -> Vec<u64> {
    let steps = 1u32 << fmt.n_ef;
    let one = (1u64 << (fmt.lut_bits - 1)) as f64;
    (0..steps)
        .map(|f| (2f64.powf(f as f64 / steps as f64) * one).round() as u64)
        .collect()
}

/// Linear `m * 2^ei` form of a log number using the table mantissa.
pub fn to_linear(d: &LogDecoded, lut: &[u64]) -> Decoded {
    if d.is_zero {
        return Decoded::zero();
    }
    Decoded::new(d.sign, d.ei, lut[d.ef as usize])
}

/// Product: signs xor, `ei.ef` fixed-point exponents add, the fraction of the
/// sum goes through the table.
pub fn log_multiply(fmt: &LogFormat, lut: &[u64], a: &LogDecoded, b: &LogDecoded) -> Decoded {
    if a.is_zero || b.is_zero {
        return Decoded::zero();
    }
    let fixed = |d: &LogDecoded| (d.ei << fmt.n_ef) | d.ef;
    let sum = fixed(a) + fixed(b);
    let frac = sum & ((1 << fmt.n_ef) - 1);
    Decoded::new(a.sign.xor(b.sign), sum >> fmt.n_ef, lut[frac as usize])
}

/// Casts a signed integer to the nearest log code.
pub fn cast_log(fmt: &LogFormat, v: i64) -> LogDecoded {
    if v == 0 {
        return match fmt.zero {
            ZeroPolicy::ReservedCode => LogDecoded::zero(),
            ZeroPolicy::SmallestValue => LogDecoded::new(Sign::Positive, 0, 0),
        };
    }
    let sign = Sign::from_bit(v < 0);
    let mag = v.unsigned_abs();
    let mut ei = 63 - mag.leading_zeros();
    let steps = 1u32 << fmt.n_ef;
    let mut ef = match fmt.rounding {
        CastRounding::LogDomain => {
            // ef >= j  iff  steps * log2(mag) - steps * ei >= j - 1/2
            //          iff  mag^(2 * steps) >= 2^(2 * steps * ei + 2j - 1)
            let p = BigUint::from(mag).pow(2 * steps);
            (1..=steps)
                .take_while(|&j| {
                    let t = 2 * steps as u64 * ei as u64 + 2 * j as u64 - 1;
                    p >= BigUint::one() << t
                })
                .count() as u32
        }
        CastRounding::LinearDomain => {
            let x = mag as f64 / 2f64.powi(ei as i32);
            let level = |j: u32| 2f64.powf(j as f64 / steps as f64);
            (0..=steps)
                .min_by(|&i, &j| {
                    (x - level(i))
                        .abs()
                        .partial_cmp(&(x - level(j)).abs())
                        .unwrap()
                })
                .unwrap()
        }
    };
    if ef == steps {
        ef = 0;
        ei += 1;
    }
    if ei > fmt.max_ei() {
        ei = fmt.max_ei();
        ef = steps - 1;
    }
    LogDecoded::new(sign, ei, ef)
}

/// The 8-bit log4.3 cast.
pub fn cast_log43(v: i64) -> LogDecoded {
    cast_log(&LogFormat::log43(), v)
}

#[derive(Debug, Clone)]
pub struct LogMac {
    fmt: LogFormat,
    lut: Vec<u64>,
    acc: Accumulator,
}

impl LogMac {
    pub fn new(fmt: LogFormat, k: u32, nv: u32) -> Result<Self> {
        Ok(LogMac {
            lut: build_lut(&fmt),
            acc: Accumulator::new(fmt.mac_config(k, nv)?)?,
            fmt,
        })
    }

    pub fn format(&self) -> &LogFormat {
        &self.fmt
    }

    pub fn lut(&self) -> &[u64] {
        &self.lut
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.acc
    }

    pub fn step(&mut self, a_code: u64, b_code: u64) -> Result<()> {
        let a = self.fmt.decode(a_code)?;
        let b = self.fmt.decode(b_code)?;
        self.acc.accumulate(&log_multiply(&self.fmt, &self.lut, &a, &b))
    }

    pub fn reconstruct(&mut self, strategy: ReconstructionStrategy) -> ExactValue {
        self.acc.reconstruct(strategy)
    }
}
