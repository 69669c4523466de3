//! Exponent-indexed accumulation.
//!
//! Inputs `sign * m * 2^e` are absorbed into partial-sum registers indexed by
//! the high bits of `e`: register `e >> k` receives `m << (e & (2^k - 1))`.
//! Reconstruction then walks the registers from the lowest group upward with a
//! small running accumulator, emitting `2^k` result bits per group.
//!
//! With `k = 0` every exponent has its own register; with `k = index_bits`
//! there is a single register and this is a Kulisch accumulator.

use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::{Decoded, FloatFormat};
use crate::regfile::RegisterFile;

pub const DEFAULT_GUARD_BITS: u32 = 12;

/// Largest supported index space; 2^16 registers at k = 0.
pub const MAX_INDEX_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccumulatorConfig {
    /// Width of the exponent index space.
    pub index_bits: u32,
    /// Group shift: `2^k` adjacent exponents share one register.
    pub k: u32,
    /// Guard bits against carry growth.
    pub nv: u32,
    /// Mantissa magnitudes fed in are at most `mantissa_bits + 1` bits wide.
    pub mantissa_bits: u32,
    /// True value = reconstructed integer * 2^(group offset + value_scale).
    pub value_scale: i64,
    /// Models a common synchronous reset; clearing is functionally identical.
    pub fast_clear: bool,
}

impl AccumulatorConfig {
    pub fn new(index_bits: u32, k: u32, nv: u32, mantissa_bits: u32, value_scale: i64) -> Result<Self> {
        let cfg = AccumulatorConfig {
            index_bits,
            k,
            nv,
            mantissa_bits,
            value_scale,
            fast_clear: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Plain summation of values in `fmt`.
    pub fn for_format(fmt: &FloatFormat, k: u32, nv: u32) -> Result<Self> {
        Self::new(fmt.ne, k, nv, fmt.nm, fmt.value_scale())
    }

    pub fn validate(&self) -> Result<()> {
        if self.index_bits == 0 || self.index_bits > MAX_INDEX_BITS {
            return Err(Error::InvalidConfig(format!(
                "index_bits {} outside 1..={MAX_INDEX_BITS}",
                self.index_bits
            )));
        }
        if self.k > self.index_bits {
            return Err(Error::InvalidConfig(format!(
                "k = {} exceeds index_bits = {}",
                self.k, self.index_bits
            )));
        }
        if self.mantissa_bits > 63 {
            return Err(Error::InvalidConfig(format!(
                "mantissa width {} exceeds 64 bits",
                self.mantissa_bits + 1
            )));
        }
        Ok(())
    }

    pub fn register_count(&self) -> usize {
        1usize << (self.index_bits - self.k)
    }

    /// Exponents per group, which is also the number of result bits emitted per group.
    pub fn group_span(&self) -> u32 {
        1u32 << self.k
    }

    /// Signed register width `W = nm' + 2^k + nv + 1`.
    pub fn register_width(&self) -> u32 {
        self.mantissa_bits + self.group_span() + self.nv + 1
    }

    pub fn with_fast_clear(mut self, on: bool) -> Self {
        self.fast_clear = on;
        self
    }

    pub fn with_nv(mut self, nv: u32) -> Self {
        self.nv = nv;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionStrategy {
    /// Every group, as in hardware without min/max tracking.
    ExactFull,
    /// Only groups between the smallest and largest touched.
    ExactRange,
    /// The top `w` groups ending at the largest touched; lower ones are discarded.
    Window(usize),
}

impl std::str::FromStr for ReconstructionStrategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" | "full" => Ok(Self::ExactFull),
            "range" => Ok(Self::ExactRange),
            _ => {
                let w = s
                    .strip_prefix("window:")
                    .ok_or_else(|| format!("unknown strategy {s:?}; use exact, range or window:N"))?;
                let w: usize = w.parse().map_err(|e| format!("bad window size: {e}"))?;
                if w == 0 {
                    return Err("window size must be positive".into());
                }
                Ok(Self::Window(w))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Accumulator {
    cfg: AccumulatorConfig,
    sums: RegisterFile,
    span: Option<(usize, usize)>,
    count: u64,
}

impl Accumulator {
    pub fn new(cfg: AccumulatorConfig) -> Result<Self> {
        cfg.validate()?;
        let sums = RegisterFile::new(cfg.register_count(), cfg.register_width());
        Ok(Accumulator {
            cfg,
            sums,
            span: None,
            count: 0,
        })
    }

    pub fn config(&self) -> &AccumulatorConfig {
        &self.cfg
    }

    /// Nonzero inputs absorbed since the last reconstruction.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Smallest and largest group touched since the last reconstruction.
    pub fn group_span(&self) -> Option<(usize, usize)> {
        self.span
    }

    pub fn partial_sum(&self, g: usize) -> BigInt {
        self.sums.get(g)
    }

    pub fn partial_sums(&self) -> Vec<BigInt> {
        (0..self.sums.len()).map(|g| self.sums.get(g)).collect()
    }

    fn touch(&mut self, g: usize) {
        self.span = Some(match self.span {
            None => (g, g),
            Some((lo, hi)) => (lo.min(g), hi.max(g)),
        });
    }

    pub fn accumulate(&mut self, x: &Decoded) -> Result<()> {
        if x.is_zero || x.mantissa == 0 {
            return Ok(());
        }
        if x.index >> self.cfg.index_bits != 0 {
            return Err(Error::IndexOutOfRange {
                index: x.index,
                index_bits: self.cfg.index_bits,
            });
        }
        if x.mantissa >> self.cfg.mantissa_bits >> 1 != 0 {
            return Err(Error::MantissaOutOfRange {
                mantissa: x.mantissa,
                bits: self.cfg.mantissa_bits + 1,
            });
        }
        let g = (x.index >> self.cfg.k) as usize;
        let shift = x.index & (self.cfg.group_span() - 1);
        self.sums
            .add_shifted(g, x.mantissa, shift, x.sign.is_negative())
            .map_err(|_| Error::Overflow {
                group: g,
                width: self.cfg.register_width(),
                count: self.count + 1,
            })?;
        self.count += 1;
        self.touch(g);
        Ok(())
    }

    pub fn accumulate_all<'a>(&mut self, xs: impl IntoIterator<Item = &'a Decoded>) -> Result<()> {
        xs.into_iter().try_for_each(|x| self.accumulate(x))
    }

    /// Adds an already-shifted signed value straight into register `g`,
    /// as a route-and-add write port does.
    pub(crate) fn add_to_group(&mut self, g: usize, v: &BigInt, absorbed: u64) -> Result<()> {
        if g >= self.sums.len() {
            return Err(Error::InvalidConfig(format!(
                "group {g} outside {} registers",
                self.sums.len()
            )));
        }
        self.sums.add_big(g, v).map_err(|_| Error::Overflow {
            group: g,
            width: self.cfg.register_width(),
            count: self.count + absorbed,
        })?;
        self.count += absorbed;
        self.touch(g);
        Ok(())
    }

    /// Groups a strategy visits, or `None` when there is nothing to visit.
    pub fn groups_for(&self, strategy: ReconstructionStrategy) -> Option<RangeInclusive<usize>> {
        match strategy {
            ReconstructionStrategy::ExactFull => Some(0..=self.sums.len() - 1),
            ReconstructionStrategy::ExactRange => self.span.map(|(lo, hi)| lo..=hi),
            ReconstructionStrategy::Window(w) => self
                .span
                .map(|(_, hi)| (hi + 1).saturating_sub(w.max(1))..=hi),
        }
    }

    /// Cycles spent after the read-out pass clearing registers it did not
    /// visit. Zero with `fast_clear`, where a common reset does it at once.
    pub fn extra_clear_cycles(&self, strategy: ReconstructionStrategy) -> usize {
        if self.cfg.fast_clear {
            return 0;
        }
        match (strategy, self.span, self.groups_for(strategy)) {
            (ReconstructionStrategy::Window(_), Some((lo, _)), Some(r)) => r.start().saturating_sub(lo),
            _ => 0,
        }
    }

    /// Produces the result and clears the accumulator for the next operation.
    pub fn reconstruct(&mut self, strategy: ReconstructionStrategy) -> ExactValue {
        let v = match self.groups_for(strategy) {
            Some(r) => self.reconstruct_groups(r.clone()),
            None => ExactValue::zero(),
        };
        self.reset();
        v
    }

    /// Reconstructs only the given groups, clearing just those registers.
    pub fn reconstruct_range(&mut self, groups: RangeInclusive<usize>) -> ExactValue {
        let v = self.reconstruct_groups(groups.clone());
        for g in groups {
            self.sums.clear(g);
        }
        v
    }

    fn reconstruct_groups(&self, groups: RangeInclusive<usize>) -> ExactValue {
        let start = *groups.start();
        let raw = shift_out(
            groups.map(|g| self.sums.get(g)),
            self.cfg.k,
            self.cfg.register_width(),
        );
        finish(raw, start, &self.cfg)
    }

    pub(crate) fn reset(&mut self) {
        // visited registers are cleared by the sequential pass, the rest by
        // the reset line when fast_clear is set; either way all end up zero
        self.sums.clear_all();
        self.span = None;
        self.count = 0;
    }
}

/// Integer produced by the shift-and-add pass over `partials` (lowest group
/// first): the concatenation of emitted low chunks plus the final
/// running value at the top.
///
/// `width` is the partial-sum register width; the running accumulator
/// is asserted to stay within `width + 1` bits.
pub(crate) fn shift_out(partials: impl Iterator<Item = BigInt>, k: u32, width: u32) -> BigInt {
    let span = 1u64 << k;
    let mask = (BigInt::one() << span) - 1;
    let bound = BigInt::one() << width;
    let mut a = BigInt::zero();
    let mut result = BigInt::zero();
    let mut offset = 0u64;
    for s in partials {
        a += s;
        assert!(
            a <= bound && a >= -&bound,
            "running accumulator exceeded {} bits",
            width + 1
        );
        let chunk = &a & &mask;
        if !chunk.is_zero() {
            result += chunk << offset;
        }
        a >>= span;
        offset += span;
    }
    // the top of the result carries the sign
    result + (a << offset)
}

fn finish(raw: BigInt, start_group: usize, cfg: &AccumulatorConfig) -> ExactValue {
    let pow2 = start_group as i64 * cfg.group_span() as i64 + cfg.value_scale;
    ExactValue::new(raw, pow2)
}

/// Exact sum of `xs` by direct big-integer arithmetic, scaled by `2^value_scale`.
///
/// Independent of the register machinery; used as a correctness oracle.
pub fn oracle_sum(xs: &[Decoded], value_scale: i64) -> ExactValue {
    let live = || xs.iter().filter(|x| !x.is_zero && x.mantissa != 0);
    let Some(min) = live().map(|x| x.index).min() else {
        return ExactValue::zero();
    };
    let mut total = BigInt::zero();
    for x in live() {
        let term = BigInt::from(x.mantissa) << (x.index - min);
        if x.sign.is_negative() {
            total -= term;
        } else {
            total += term;
        }
    }
    ExactValue::new(total, min as i64 + value_scale)
}
