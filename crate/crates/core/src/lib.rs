//! Exact accumulation of floating-point, posit and logarithmic numbers.
//!
//! Each input's mantissa is added into a partial-sum register selected by the
//! high bits of its exponent; a final shift-and-add pass over the registers
//! produces the exact sum. See [`accumulator::Accumulator`] for the core
//! structure and [`mac::MacState`] for the fused multiply-accumulate.
//!
//! ```
//! use eiacc::{Accumulator, AccumulatorConfig, FloatFormat, ReconstructionStrategy};
//!
//! let bf16 = FloatFormat::bf16();
//! let mut acc = Accumulator::new(AccumulatorConfig::for_format(&bf16, 3, 12)?)?;
//! for code in [0x3F80, 0x3F80, 0x3F00] {
//!     acc.accumulate(&bf16.decode(code)?)?;
//! }
//! let sum = acc.reconstruct(ReconstructionStrategy::ExactRange);
//! assert_eq!(sum.to_string(), "+5 * 2^-1");
//! assert_eq!(sum.to_f64(), 2.5);
//! # Ok::<(), eiacc::Error>(())
//! ```

pub mod accumulator;
pub mod cli;
pub mod cost_model;
pub mod error;
pub mod exact;
pub mod formats;
pub mod gen;
pub mod lns;
pub mod mac;
pub mod parallel;
pub mod posit;
mod regfile;
pub mod stream;
pub mod tensor_core;

pub use accumulator::{oracle_sum, Accumulator, AccumulatorConfig, ReconstructionStrategy};
pub use error::{Error, Result};
pub use exact::ExactValue;
pub use formats::{Decoded, FloatFormat, Sign};
pub use mac::{MacConfig, MacState};
pub use stream::{CodeStream, NumberFormat};
