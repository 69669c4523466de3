//! Size estimate for entropy-coded log weights.
//!
//! Each weight matrix is scaled to 16 bits plus sign, cast to a log code, and
//! costed at `-log2(p)` bits per symbol with `p` taken from that matrix's own
//! histogram. No bitstream is produced.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;

use super::{cast_log, LogFormat};
use crate::error::{Error, Result};
use crate::formats::{f64_parts, FloatFormat};

/// Full scale after linear scaling: `2^16 - 1`.
pub const FULL_SCALE: u32 = 65535;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Whole code is the symbol.
    A,
    /// Only `ei` (or zero) is the symbol; sign and `ef` are sent raw.
    B,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Method::A),
            "b" => Ok(Method::B),
            _ => Err(format!("unknown method {s:?}; use a or b")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionEstimate {
    pub count: usize,
    /// Entropy-coded bits.
    pub entropy_bits: f64,
    /// Bits sent uncoded (method B only).
    pub raw_bits: f64,
    pub total_bits: f64,
    pub avg_bits: f64,
    /// Distinct symbols in the histogram.
    pub symbols: usize,
}

/// Scales weights by `(2^16 - 1) / max|w|` and rounds to nearest (ties away
/// from zero), computed exactly.
pub fn scale_matrix(weights: &[f64]) -> Result<Vec<i32>> {
    if weights.is_empty() {
        return Err(Error::Empty("weight matrix"));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Unencodable(format!("non-finite weight {w}")));
    }
    let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let (mm, em) = f64_parts(max);
    Ok(weights
        .iter()
        .map(|&w| {
            if w == 0.0 {
                return 0;
            }
            // |w| / max = (mw / mm) * 2^(ew - em)
            let (mw, ew) = f64_parts(w.abs());
            let d = ew - em;
            let mut num = BigUint::from(FULL_SCALE) * mw;
            let mut den = BigUint::from(mm);
            if d >= 0 {
                num <<= d as u64;
            } else {
                den <<= (-d) as u64;
            }
            let q: BigUint = (num * 2u32 + &den).div_floor(&(den * 2u32));
            let q = q.to_i32().expect("scaled weight exceeds full scale");
            if w < 0.0 {
                -q
            } else {
                q
            }
        })
        .collect())
}

fn symbol(fmt: &LogFormat, code: u64, method: Method) -> Option<u64> {
    match method {
        Method::A => Some(code),
        Method::B => match fmt.decode(code) {
            Ok(d) if d.is_zero => None,
            Ok(d) => Some(d.ei as u64),
            Err(_) => Some(code),
        },
    }
}

/// Shannon cost of `codes` under `method`, with probabilities from their own histogram.
pub fn estimate_compression(fmt: &LogFormat, codes: &[u64], method: Method) -> Result<CompressionEstimate> {
    if codes.is_empty() {
        return Err(Error::Empty("code stream"));
    }
    for &c in codes {
        fmt.decode(c)?;
    }
    let n = codes.len();
    let mut hist: HashMap<Option<u64>, usize> = HashMap::new();
    for &c in codes {
        *hist.entry(symbol(fmt, c, method)).or_default() += 1;
    }
    // sorted so the floating-point sum is reproducible
    let mut counts: Vec<(Option<u64>, usize)> = hist.into_iter().collect();
    counts.sort_unstable();
    let entropy_bits: f64 = counts
        .iter()
        .map(|&(_, c)| c as f64 * -(c as f64 / n as f64).log2())
        .sum();
    let raw_bits = match method {
        Method::A => 0.0,
        Method::B => {
            let nonzero = counts.iter().filter(|(s, _)| s.is_some()).map(|(_, c)| c).sum::<usize>();
            (nonzero as u64 * (1 + fmt.n_ef) as u64) as f64
        }
    };
    let total_bits = entropy_bits + raw_bits;
    Ok(CompressionEstimate {
        count: n,
        entropy_bits,
        raw_bits,
        total_bits,
        avg_bits: total_bits / n as f64,
        symbols: counts.len(),
    })
}

/// A weight matrix inside a flat weight file, in elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixSpan {
    pub offset: usize,
    pub count: usize,
}

/// Parses `offset count` (or `offset,count`) lines; `#` starts a comment.
pub fn parse_manifest(text: &str) -> Result<Vec<MatrixSpan>> {
    let mut spans = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let bad = || Error::Manifest(format!("line {}: expected 'offset count', got {line:?}", lineno + 1));
        if fields.len() != 2 {
            return Err(bad());
        }
        let offset = fields[0].parse().map_err(|_| bad())?;
        let count: usize = fields[1].parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(Error::Manifest(format!("line {}: empty matrix", lineno + 1)));
        }
        spans.push(MatrixSpan { offset, count });
    }
    if spans.is_empty() {
        return Err(Error::Manifest("no matrices listed".into()));
    }
    Ok(spans)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompressionReport {
    pub method: Method,
    pub per_matrix: Vec<CompressionEstimate>,
    pub weights: usize,
    pub total_bits: f64,
    /// Size of the same weights stored as plain log codes.
    pub raw_bits: u64,
}

impl CompressionReport {
    pub fn total_bytes(&self) -> f64 {
        self.total_bits / 8.0
    }

    pub fn percent_of_raw(&self) -> f64 {
        100.0 * self.total_bits / self.raw_bits as f64
    }

    pub fn avg_bits(&self) -> f64 {
        self.total_bits / self.weights as f64
    }
}

/// Runs scale, cast and estimate over every matrix of a bfloat16 weight stream.
pub fn compress_weights(
    fmt: &LogFormat,
    bf16_codes: &[u64],
    spans: &[MatrixSpan],
    method: Method,
) -> Result<CompressionReport> {
    let bf = FloatFormat::bf16();
    let mut per_matrix = Vec::with_capacity(spans.len());
    let mut weights = 0usize;
    for (i, span) in spans.iter().enumerate() {
        let end = span.offset.checked_add(span.count).filter(|&e| e <= bf16_codes.len()).ok_or_else(|| {
            Error::Manifest(format!(
                "matrix {i} ({}+{}) runs past the {} weights in the file",
                span.offset,
                span.count,
                bf16_codes.len()
            ))
        })?;
        let values = bf16_codes[span.offset..end]
            .iter()
            .map(|&c| bf.decode(c).map(|d| bf.to_exact(&d).to_f64()))
            .collect::<Result<Vec<f64>>>()?;
        let scaled = scale_matrix(&values)?;
        let codes = scaled
            .iter()
            .map(|&v| fmt.encode_nearest(&cast_log(fmt, v as i64)))
            .collect::<Result<Vec<u64>>>()?;
        per_matrix.push(estimate_compression(fmt, &codes, method)?);
        weights += span.count;
    }
    let total_bits = per_matrix.iter().map(|e| e.total_bits).sum();
    Ok(CompressionReport {
        method,
        per_matrix,
        weights,
        total_bits,
        raw_bits: weights as u64 * fmt.width() as u64,
    })
}
