//! Fused multiply-accumulate on top of the exponent-indexed accumulator.
//!
//! Products are formed exactly: signs xor, exponent indices add, mantissas
//! multiply. Neither bias is removed per product; the doubled bias lives in
//! the accumulator's `value_scale`.

use crate::accumulator::{Accumulator, AccumulatorConfig, ReconstructionStrategy};
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::{Decoded, FloatFormat, Sign};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacConfig {
    pub fmt: FloatFormat,
    pub k: u32,
    pub nv: u32,
    /// Magnitude width of fixed-point operands; defaults to `nm + 1`.
    pub fixed_bits: u32,
}

impl MacConfig {
    pub fn new(fmt: FloatFormat, k: u32, nv: u32) -> Self {
        let fixed_bits = fmt.nm + 1;
        MacConfig { fmt, k, nv, fixed_bits }
    }

    pub fn with_fixed_bits(mut self, bits: u32) -> Self {
        self.fixed_bits = bits;
        self
    }

    /// Index space of summed exponents, `ne + 1` bits.
    pub fn index_bits(&self) -> u32 {
        self.fmt.ne + 1
    }

    /// `nm'` such that every product magnitude is below `2^(nm' + 1)`.
    pub fn product_mantissa_bits(&self) -> u32 {
        let m = self.fmt.nm + 1;
        (2 * m).max(m + self.fixed_bits) - 1
    }

    pub fn value_scale(&self) -> i64 {
        2 * self.fmt.value_scale()
    }

    pub fn accumulator_config(&self) -> Result<AccumulatorConfig> {
        AccumulatorConfig::new(
            self.index_bits(),
            self.k,
            self.nv,
            self.product_mantissa_bits(),
            self.value_scale(),
        )
    }

    /// Exponent index standing in for a fixed-point operand scaled by
    /// `2^scale_pow2`, under this format's bias convention.
    pub fn fixed_index(&self, scale_pow2: i32) -> Result<u32> {
        let idx = scale_pow2 as i64 + self.fmt.bias as i64 + self.fmt.nm as i64;
        if idx < 0 || idx > self.fmt.max_index() as i64 {
            return Err(Error::FixedScaleOutOfRange(scale_pow2));
        }
        Ok(idx as u32)
    }
}

/// Exact product of two decoded operands, unnormalized.
pub fn multiply(a: &Decoded, b: &Decoded) -> Decoded {
    if a.is_zero || b.is_zero {
        return Decoded::zero();
    }
    Decoded {
        sign: a.sign.xor(b.sign),
        index: a.index + b.index,
        mantissa: a.mantissa * b.mantissa,
        is_zero: false,
    }
}

#[derive(Debug, Clone)]
pub struct MacState {
    cfg: MacConfig,
    acc: Accumulator,
}

impl MacState {
    pub fn new(cfg: MacConfig) -> Result<Self> {
        let acc = Accumulator::new(cfg.accumulator_config()?)?;
        Ok(MacState { cfg, acc })
    }

    pub fn config(&self) -> &MacConfig {
        &self.cfg
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.acc
    }

    pub fn step(&mut self, a_code: u64, b_code: u64) -> Result<()> {
        let a = self.cfg.fmt.decode(a_code)?;
        let b = self.cfg.fmt.decode(b_code)?;
        self.step_decoded(&a, &b)
    }

    pub fn step_decoded(&mut self, a: &Decoded, b: &Decoded) -> Result<()> {
        self.acc.accumulate(&multiply(a, b))
    }

    /// Multiplies `fixed * 2^scale_pow2` by a float code and accumulates.
    pub fn fixed_step(&mut self, fixed: i64, scale_pow2: i32, b_code: u64) -> Result<()> {
        let b = self.cfg.fmt.decode(b_code)?;
        let fixed_operand = self.fixed_operand(fixed, scale_pow2)?;
        self.step_decoded(&fixed_operand, &b)
    }

    fn fixed_operand(&self, fixed: i64, scale_pow2: i32) -> Result<Decoded> {
        let mag = fixed.unsigned_abs();
        if mag >> self.cfg.fixed_bits != 0 {
            return Err(Error::FixedOutOfRange {
                value: fixed,
                bits: self.cfg.fixed_bits,
            });
        }
        if mag == 0 {
            return Ok(Decoded::zero());
        }
        Ok(Decoded::new(
            Sign::from_bit(fixed < 0),
            self.cfg.fixed_index(scale_pow2)?,
            mag,
        ))
    }

    pub fn reconstruct(&mut self, strategy: ReconstructionStrategy) -> ExactValue {
        self.acc.reconstruct(strategy)
    }

    pub(crate) fn accumulator_mut(&mut self) -> &mut Accumulator {
        &mut self.acc
    }
}

/// Exact dot product of two code vectors via one MAC.
pub fn dot(cfg: &MacConfig, a: &[u64], b: &[u64]) -> Result<ExactValue> {
    if a.len() != b.len() {
        return Err(Error::LaneCount {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut m = MacState::new(cfg.clone())?;
    for (&x, &y) in a.iter().zip(b) {
        m.step(x, y)?;
    }
    Ok(m.reconstruct(ReconstructionStrategy::ExactRange))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bf(x: f64) -> u64 {
        FloatFormat::bf16().encode_f64(x).unwrap()
    }

    fn mac(k: u32) -> MacState {
        MacState::new(MacConfig::new(FloatFormat::bf16(), k, 12)).unwrap()
    }

    #[test]
    fn derived_config() {
        let cfg = MacConfig::new(FloatFormat::bf16(), 3, 12);
        assert_eq!(cfg.index_bits(), 9);
        assert_eq!(cfg.product_mantissa_bits(), 15);
        assert_eq!(cfg.value_scale(), -268);
    }

    #[test]
    fn single_products() {
        for k in 0..=9 {
            let mut m = mac(k);
            m.step(bf(1.5), bf(2.0)).unwrap();
            assert_eq!(m.reconstruct(ReconstructionStrategy::ExactRange), ExactValue::from_i64(3));
        }
        let mut m = mac(0);
        m.step(bf(1.0), bf(0.0)).unwrap();
        assert_eq!(m.accumulator().count(), 0);
    }

    #[test]
    fn small_dot() {
        let cfg = MacConfig::new(FloatFormat::bf16(), 2, 12);
        let a: Vec<u64> = [1.0, 2.0, 4.0].map(bf).to_vec();
        let b: Vec<u64> = [1.0, 1.0, 1.0].map(bf).to_vec();
        assert_eq!(dot(&cfg, &a, &b).unwrap(), ExactValue::from_i64(7));
        assert!(dot(&cfg, &a, &b[..2]).is_err());
    }

    #[test]
    fn fixed_point_operands() {
        let mut m = mac(0);
        m.fixed_step(3, 0, bf(1.0)).unwrap();
        assert_eq!(m.reconstruct(ReconstructionStrategy::ExactRange), ExactValue::from_i64(3));
        m.fixed_step(-1, -2, bf(4.0)).unwrap();
        assert_eq!(m.reconstruct(ReconstructionStrategy::ExactRange), ExactValue::from_i64(-1));
        m.fixed_step(0, 5, bf(3.0)).unwrap();
        assert_eq!(m.accumulator().count(), 0);
        assert!(matches!(m.fixed_step(256, 0, bf(1.0)), Err(Error::FixedOutOfRange { .. })));
        assert!(matches!(m.fixed_step(1, 200, bf(1.0)), Err(Error::FixedScaleOutOfRange(200))));
    }

    #[test]
    fn wider_fixed_operands() {
        let cfg = MacConfig::new(FloatFormat::bf16(), 1, 12).with_fixed_bits(16);
        let mut m = MacState::new(cfg).unwrap();
        m.fixed_step(-40000, -3, bf(0.5)).unwrap();
        assert_eq!(m.reconstruct(ReconstructionStrategy::ExactFull), ExactValue::from_i64(-2500));
    }

    #[test]
    fn commutative() {
        let a = bf(-3.25);
        let b = bf(0.0078125);
        let mut x = mac(3);
        let mut y = mac(3);
        x.step(a, b).unwrap();
        y.step(b, a).unwrap();
        assert_eq!(x.accumulator().partial_sums(), y.accumulator().partial_sums());
    }

    #[test]
    fn nonfinite_operand_errors() {
        let mut m = mac(0);
        assert!(matches!(m.step(0x7F80, bf(1.0)), Err(Error::Nonfinite { .. })));
    }
}
