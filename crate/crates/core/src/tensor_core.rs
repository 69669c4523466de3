//! Functional model of a 4x4 bfloat16 tensor core computing
//! `C = sum_i A_i * B_i` exactly.
//!
//! In the 64-MAC layout element `(r, l)` owns four MACs, one per inner index
//! `j`. At read-out the four partial-sum files are added group by group (the
//! accumulator chain) and a single shift-and-add pass produces the element.
//! The 16-MAC layout gives each element one MAC that absorbs the four products
//! over four sub-steps.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::accumulator::{shift_out, DEFAULT_GUARD_BITS};
use crate::error::Result;
use crate::exact::ExactValue;
use crate::formats::{Decoded, FloatFormat};
use crate::mac::{MacConfig, MacState};

pub const DIM: usize = 4;

/// Extra guard bits so the sum of four chained partial sums cannot overflow.
pub const CHAIN_HEADROOM: u32 = 2;

pub type CodeMatrix = [[u64; DIM]; DIM];
pub type ExactMatrix = [[ExactValue; DIM]; DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TensorCoreMode {
    /// One product per MAC per step, chained reconstruction.
    #[default]
    Mac64,
    /// Four sub-steps per matrix pair through 16 MACs.
    Mac16,
}

impl std::str::FromStr for TensorCoreMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "64mac" | "64" => Ok(Self::Mac64),
            "16mac" | "16" => Ok(Self::Mac16),
            _ => Err(format!("unknown tensor core mode {s:?}; use 64mac or 16mac")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TensorCore {
    mode: TensorCoreMode,
    cfg: MacConfig,
    macs: Vec<MacState>,
}

impl TensorCore {
    pub fn new(k: u32, nv: u32, mode: TensorCoreMode) -> Result<Self> {
        let cfg = MacConfig::new(FloatFormat::bf16(), k, nv + CHAIN_HEADROOM);
        let n = match mode {
            TensorCoreMode::Mac64 => DIM * DIM * DIM,
            TensorCoreMode::Mac16 => DIM * DIM,
        };
        let mac = MacState::new(cfg.clone())?;
        Ok(TensorCore {
            mode,
            cfg,
            macs: vec![mac; n],
        })
    }

    pub fn with_defaults(k: u32) -> Result<Self> {
        Self::new(k, DEFAULT_GUARD_BITS, TensorCoreMode::Mac64)
    }

    pub fn mode(&self) -> TensorCoreMode {
        self.mode
    }

    /// MAC accumulating `a[r][j] * b[j][l]` (64-MAC layout) or all of element
    /// `(r, l)` (16-MAC layout, `j` ignored).
    pub fn mac(&self, r: usize, l: usize, j: usize) -> &MacState {
        &self.macs[self.slot(r, l, j)]
    }

    fn slot(&self, r: usize, l: usize, j: usize) -> usize {
        match self.mode {
            TensorCoreMode::Mac64 => (r * DIM + l) * DIM + j,
            TensorCoreMode::Mac16 => r * DIM + l,
        }
    }

    /// Accumulates one matrix product `A * B`.
    pub fn step(&mut self, a: &CodeMatrix, b: &CodeMatrix) -> Result<()> {
        let fmt = &self.cfg.fmt;
        let mut da = [[Decoded::zero(); DIM]; DIM];
        let mut db = [[Decoded::zero(); DIM]; DIM];
        for r in 0..DIM {
            for c in 0..DIM {
                da[r][c] = fmt.decode(a[r][c])?;
                db[r][c] = fmt.decode(b[r][c])?;
            }
        }
        // in 16-MAC mode j is the sub-step; the loop order mirrors that
        for j in 0..DIM {
            for r in 0..DIM {
                for l in 0..DIM {
                    let s = self.slot(r, l, j);
                    self.macs[s].step_decoded(&da[r][j], &db[j][l])?;
                }
            }
        }
        Ok(())
    }

    /// Reads out `C` and clears every MAC.
    pub fn reconstruct(&mut self) -> ExactMatrix {
        let mut out: ExactMatrix = Default::default();
        for (r, row) in out.iter_mut().enumerate() {
            for (l, cell) in row.iter_mut().enumerate() {
                *cell = match self.mode {
                    TensorCoreMode::Mac64 => self.chained_element(r, l),
                    TensorCoreMode::Mac16 => {
                        let s = self.slot(r, l, 0);
                        self.macs[s].reconstruct(crate::ReconstructionStrategy::ExactRange)
                    }
                };
            }
        }
        out
    }

    fn chained_element(&mut self, r: usize, l: usize) -> ExactValue {
        let slots: Vec<usize> = (0..DIM).map(|j| self.slot(r, l, j)).collect();
        // union of the touched ranges; absent groups are zero
        let span = slots
            .iter()
            .filter_map(|&s| self.macs[s].accumulator().group_span())
            .reduce(|(a, b), (c, d)| (a.min(c), b.max(d)));
        let value = match span {
            None => ExactValue::zero(),
            Some((lo, hi)) => {
                let acc_cfg = self.macs[slots[0]].accumulator().config().clone();
                let chained = (lo..=hi).map(|g| {
                    slots.iter().fold(BigInt::zero(), |t, &s| {
                        t + self.macs[s].accumulator().partial_sum(g)
                    })
                });
                let raw = shift_out(chained, acc_cfg.k, acc_cfg.register_width() + CHAIN_HEADROOM);
                ExactValue::new(
                    raw,
                    lo as i64 * acc_cfg.group_span() as i64 + acc_cfg.value_scale,
                )
            }
        };
        for s in slots {
            self.macs[s].accumulator_mut().reset();
        }
        value
    }
}

/// Exact `sum_i A_i * B_i` by direct rational arithmetic.
pub fn matmul_oracle(pairs: &[(CodeMatrix, CodeMatrix)]) -> Result<ExactMatrix> {
    let fmt = FloatFormat::bf16();
    let mut out: ExactMatrix = Default::default();
    for (a, b) in pairs {
        for r in 0..DIM {
            for l in 0..DIM {
                for j in 0..DIM {
                    let x = fmt.to_exact(&fmt.decode(a[r][j])?);
                    let y = fmt.to_exact(&fmt.decode(b[j][l])?);
                    out[r][l] = &out[r][l] + &x.mul(&y);
                }
            }
        }
    }
    Ok(out)
}
