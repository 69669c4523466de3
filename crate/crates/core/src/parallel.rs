//! N-lane accumulator with a route-and-add network in front of a multi-port
//! partial-sum register file.
//!
//! Lanes whose inputs fall in the same exponent group are summed before the
//! register file is touched, and only the leftmost such lane is granted the
//! write, so no register sees two writes in one step.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::accumulator::{Accumulator, AccumulatorConfig, ReconstructionStrategy};
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::Decoded;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LaneInput {
    pub group: usize,
    /// Two's-complement mantissa, already shifted by `index mod 2^k`.
    pub shifted_mantissa: BigInt,
    pub active: bool,
}

impl LaneInput {
    pub fn inactive() -> Self {
        LaneInput::default()
    }

    pub fn from_decoded(x: &Decoded, k: u32) -> Self {
        if x.is_zero || x.mantissa == 0 {
            return Self::inactive();
        }
        let m = BigInt::from(x.mantissa) << (x.index & ((1 << k) - 1));
        LaneInput {
            group: (x.index >> k) as usize,
            shifted_mantissa: if x.sign.is_negative() { -m } else { m },
            active: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneWrite {
    /// Register address, the lane's group.
    pub address: usize,
    pub sum: BigInt,
    pub write_enable: bool,
    /// Active lanes folded into this write.
    pub merged: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutedWrites {
    pub lanes: Vec<LaneWrite>,
}

impl RoutedWrites {
    pub fn enabled(&self) -> impl Iterator<Item = &LaneWrite> {
        self.lanes.iter().filter(|w| w.write_enable)
    }
}

/// Combinational route-and-add: each lane looks only to its right.
pub fn route_and_add(lanes: &[LaneInput]) -> RoutedWrites {
    let out = lanes
        .iter()
        .enumerate()
        .map(|(i, lane)| {
            let shadowed = lanes[..i]
                .iter()
                .any(|l| l.active && l.group == lane.group);
            if !lane.active || shadowed {
                return LaneWrite {
                    address: lane.group,
                    sum: lane.shifted_mantissa.clone(),
                    write_enable: false,
                    merged: 0,
                };
            }
            let mut sum = BigInt::zero();
            let mut merged = 0;
            for l in lanes[i..].iter().filter(|l| l.active && l.group == lane.group) {
                sum += &l.shifted_mantissa;
                merged += 1;
            }
            LaneWrite {
                address: lane.group,
                sum,
                write_enable: true,
                merged,
            }
        })
        .collect();
    RoutedWrites { lanes: out }
}

#[derive(Debug, Clone)]
pub struct ParallelAccumulator {
    lanes: usize,
    acc: Accumulator,
}

impl ParallelAccumulator {
    pub fn new(cfg: AccumulatorConfig, lanes: usize) -> Result<Self> {
        if lanes == 0 {
            return Err(Error::InvalidConfig("lane count must be positive".into()));
        }
        Ok(ParallelAccumulator {
            lanes,
            acc: Accumulator::new(cfg)?,
        })
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.acc
    }

    pub fn accumulate(&mut self, inputs: &[LaneInput]) -> Result<()> {
        if inputs.len() != self.lanes {
            return Err(Error::LaneCount {
                expected: self.lanes,
                got: inputs.len(),
            });
        }
        let writes = route_and_add(inputs);
        for w in writes.enabled() {
            self.acc.add_to_group(w.address, &w.sum, w.merged)?;
        }
        Ok(())
    }

    /// Feeds up to `lanes` decoded values in one step; missing lanes are idle.
    pub fn accumulate_decoded(&mut self, xs: &[Decoded]) -> Result<()> {
        if xs.len() > self.lanes {
            return Err(Error::LaneCount {
                expected: self.lanes,
                got: xs.len(),
            });
        }
        let k = self.acc.config().k;
        let index_bits = self.acc.config().index_bits;
        let mantissa_bits = self.acc.config().mantissa_bits;
        for x in xs.iter().filter(|x| !x.is_zero) {
            if x.index >> index_bits != 0 {
                return Err(Error::IndexOutOfRange {
                    index: x.index,
                    index_bits,
                });
            }
            if x.mantissa >> mantissa_bits >> 1 != 0 {
                return Err(Error::MantissaOutOfRange {
                    mantissa: x.mantissa,
                    bits: mantissa_bits + 1,
                });
            }
        }
        let mut inputs: Vec<LaneInput> = xs.iter().map(|x| LaneInput::from_decoded(x, k)).collect();
        inputs.resize(self.lanes, LaneInput::inactive());
        self.accumulate(&inputs)
    }

    pub fn reconstruct(&mut self, strategy: ReconstructionStrategy) -> ExactValue {
        self.acc.reconstruct(strategy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::FloatFormat;

    fn lanes(groups: &[usize], ms: &[i64]) -> Vec<LaneInput> {
        groups
            .iter()
            .zip(ms)
            .map(|(&g, &m)| LaneInput {
                group: g,
                shifted_mantissa: BigInt::from(m),
                active: true,
            })
            .collect()
    }

    #[test]
    fn routes_same_group_to_leftmost() {
        let w = route_and_add(&lanes(&[5, 5, 7, 5], &[1, 2, 4, 8]));
        let got: Vec<(i64, bool)> = w
            .lanes
            .iter()
            .map(|l| (i64::try_from(&l.sum).unwrap(), l.write_enable))
            .collect();
        assert_eq!(got[0], (11, true));
        assert!(!got[1].1);
        assert_eq!(got[2], (4, true));
        assert!(!got[3].1);
        assert_eq!(w.lanes[0].merged, 3);
    }

    #[test]
    fn idle_and_cancelling_lanes() {
        let w = route_and_add(&vec![LaneInput::inactive(); 4]);
        assert!(w.lanes.iter().all(|l| !l.write_enable));
        let w = route_and_add(&lanes(&[2, 2, 2, 2], &[1, -1, 1, -1]));
        assert!(w.lanes[0].write_enable && w.lanes[0].sum.is_zero());
        assert!(w.lanes[1..].iter().all(|l| !l.write_enable));
    }

    #[test]
    fn inactive_lane_does_not_shadow() {
        let mut ls = lanes(&[3, 3], &[1, 2]);
        ls[0].active = false;
        let w = route_and_add(&ls);
        assert!(!w.lanes[0].write_enable);
        assert!(w.lanes[1].write_enable);
        assert_eq!(w.lanes[1].sum, BigInt::from(2));
    }

    #[test]
    fn four_lane_sum() {
        let f = FloatFormat::bf16();
        let xs: Vec<Decoded> = [1.0, 1.0, 2.0, -1.0]
            .iter()
            .map(|&x| f.decode(f.encode_f64(x).unwrap()).unwrap())
            .collect();
        let cfg = AccumulatorConfig::for_format(&f, 2, 12).unwrap();
        let mut p = ParallelAccumulator::new(cfg, 4).unwrap();
        p.accumulate_decoded(&xs).unwrap();
        assert_eq!(p.accumulator().count(), 4);
        assert_eq!(p.reconstruct(ReconstructionStrategy::ExactRange), ExactValue::from_i64(3));
    }

    #[test]
    fn lane_count_checked() {
        let cfg = AccumulatorConfig::for_format(&FloatFormat::bf16(), 0, 12).unwrap();
        let mut p = ParallelAccumulator::new(cfg, 2).unwrap();
        assert!(p.accumulate(&[LaneInput::inactive()]).is_err());
        assert!(ParallelAccumulator::new(AccumulatorConfig::for_format(&FloatFormat::bf16(), 0, 12).unwrap(), 0).is_err());
    }

    #[test]
    fn batched_overflow_is_caught() {
        let f = FloatFormat::e4m3();
        // W = 7: four max mantissas (60) fit, a fifth does not
        let cfg = AccumulatorConfig::for_format(&f, 0, 2).unwrap();
        let mut p = ParallelAccumulator::new(cfg, 8).unwrap();
        let x = f.decode(0x77).unwrap();
        assert!(p.accumulate_decoded(&[x; 4]).is_ok());
        assert!(matches!(p.accumulate_decoded(&[x]), Err(Error::Overflow { .. })));
    }
}
