//! Posit decoding into the `m * 2^e` form.
//!
//! Posit fractions have a width that depends on the regime length. Every
//! fraction is left-aligned to the widest possible one (`n - 3 - es` bits)
//! when decoded, so the padding zeros are applied up front and the ordinary
//! accumulator handles posit streams unchanged.

use crate::accumulator::AccumulatorConfig;
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::{Decoded, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PositConfig {
    pub n: u32,
    pub es: u32,
}

impl PositConfig {
    pub fn new(n: u32, es: u32) -> Result<Self> {
        if !(2..=32).contains(&n) || es > 3 {
            return Err(Error::InvalidFormat(format!(
                "posit<{n},{es}>: need 2 <= n <= 32 and es <= 3"
            )));
        }
        Ok(PositConfig { n, es })
    }

    pub fn posit8() -> Self {
        PositConfig { n: 8, es: 0 }
    }

    pub fn posit16() -> Self {
        PositConfig { n: 16, es: 1 }
    }

    /// Widest fraction field.
    pub fn max_fraction_bits(&self) -> u32 {
        self.n.saturating_sub(3 + self.es)
    }

    /// Offset making every index non-negative: `(n - 1) * 2^es`.
    pub fn scale_bias(&self) -> u32 {
        (self.n - 1) << self.es
    }

    /// Bits needed to hold indices in `[0, 2 * scale_bias]`.
    pub fn index_bits(&self) -> u32 {
        32 - (2 * self.scale_bias()).leading_zeros()
    }

    pub fn byte_width(&self) -> usize {
        self.n.div_ceil(8) as usize
    }

    pub fn nar(&self) -> u64 {
        1u64 << (self.n - 1)
    }

    pub fn value_scale(&self) -> i64 {
        -(self.scale_bias() as i64) - self.max_fraction_bits() as i64
    }

    pub fn to_exact(&self, d: &Decoded) -> ExactValue {
        d.to_exact(self.value_scale())
    }

    pub fn decode(&self, code: u64) -> Result<Decoded> {
        decode_posit(self, code)
    }
}

impl std::fmt::Display for PositConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "posit<{},{}>", self.n, self.es)
    }
}

pub fn decode_posit(cfg: &PositConfig, code: u64) -> Result<Decoded> {
    let n = cfg.n;
    if code >> n != 0 {
        return Err(Error::CodeOutOfRange { code, width: n });
    }
    if code == 0 {
        return Ok(Decoded::zero());
    }
    if code == cfg.nar() {
        return Err(Error::NotAReal { code });
    }
    let mask = (1u64 << n) - 1;
    let negative = code >> (n - 1) == 1;
    let body = if negative { code.wrapping_neg() & mask } else { code };

    // regime: run of identical bits starting just below the sign
    let first = (body >> (n - 2)) & 1;
    let mut run = 0u32;
    while run < n - 1 && (body >> (n - 2 - run)) & 1 == first {
        run += 1;
    }
    let regime: i64 = if first == 1 { run as i64 - 1 } else { -(run as i64) };
    // bits left after sign, regime and its terminator (absent if the run hits the end)
    let consumed = 1 + run + u32::from(run < n - 1);
    let rest_bits = n - consumed;
    let rest = body & ((1u64 << rest_bits) - 1);

    let (exp, frac, nf) = if rest_bits >= cfg.es {
        let nf = rest_bits - cfg.es;
        (rest >> nf, rest & ((1u64 << nf) - 1), nf)
    } else {
        // truncated exponent bits are zero
        (rest << (cfg.es - rest_bits), 0, 0)
    };
    let scale = (regime << cfg.es) + exp as i64;
    let fmax = cfg.max_fraction_bits();
    debug_assert!(nf <= fmax);
    let index = scale + cfg.scale_bias() as i64;
    debug_assert!(index >= 0 && index <= 2 * cfg.scale_bias() as i64);
    Ok(Decoded::new(
        Sign::from_bit(negative),
        index as u32,
        ((1u64 << nf) | frac) << (fmax - nf),
    ))
}

/// Accumulator sized for posit streams of `cfg`.
pub fn posit_accumulator(cfg: &PositConfig, k: u32, nv: u32) -> Result<AccumulatorConfig> {
    AccumulatorConfig::new(cfg.index_bits(), k, nv, cfg.max_fraction_bits(), cfg.value_scale())
}
