//! Binary code streams: `EIA1`, a one-byte format id, a little-endian `u64`
//! count, then the codes little-endian at the format's natural byte width.

use std::io::{Read, Write};

use crate::accumulator::AccumulatorConfig;
use crate::error::{Error, Result};
use crate::exact::ExactValue;
use crate::formats::{Decoded, FloatFormat};
use crate::lns::{log_multiply, to_linear, LogFormat};
use crate::mac::multiply;
use crate::posit::{posit_accumulator, PositConfig};

pub const MAGIC: &[u8; 4] = b"EIA1";
pub const HEADER_LEN: usize = 13;

/// Any number format a stream can carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NumberFormat {
    Float(FloatFormat),
    Log(LogFormat),
    Posit(PositConfig),
}

impl NumberFormat {
    pub fn from_id(id: u8) -> Result<Self> {
        Ok(match id {
            0 => Self::Float(FloatFormat::fp32()),
            1 => Self::Float(FloatFormat::bf16()),
            2 => Self::Float(FloatFormat::fp16()),
            3 => Self::Float(FloatFormat::e5m2()),
            4 => Self::Float(FloatFormat::e4m3()),
            5 => Self::Float(FloatFormat::e3m4()),
            6 => Self::Log(LogFormat::log43()),
            7 => Self::Posit(PositConfig::posit16()),
            8 => Self::Posit(PositConfig::posit8()),
            _ => return Err(Error::Stream(format!("unknown format id {id}"))),
        })
    }

    pub fn id(&self) -> Option<u8> {
        (0..=8).find(|&id| Self::from_id(id).as_ref() == Ok(self))
    }

    pub fn by_name(name: &str) -> Option<Self> {
        let n = name.to_ascii_lowercase();
        match n.as_str() {
            "log4.3" | "log43" | "lns" => Some(Self::Log(LogFormat::log43())),
            "posit16" | "posit16es1" => Some(Self::Posit(PositConfig::posit16())),
            "posit8" | "posit8es0" => Some(Self::Posit(PositConfig::posit8())),
            _ => FloatFormat::by_name(&n).map(Self::Float),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Self::Float(f) => f.name.clone(),
            Self::Log(l) => format!("log{}.{}", l.n_ei, l.n_ef),
            Self::Posit(p) => format!("posit{}es{}", p.n, p.es),
        }
    }

    pub fn bits(&self) -> u32 {
        match self {
            Self::Float(f) => f.width(),
            Self::Log(l) => l.width(),
            Self::Posit(p) => p.n,
        }
    }

    pub fn byte_width(&self) -> usize {
        self.bits().div_ceil(8) as usize
    }

    /// Linear `m * 2^index` form; log codes go through the mantissa table.
    pub fn decode(&self, code: u64) -> Result<Decoded> {
        match self {
            Self::Float(f) => f.decode(code),
            Self::Log(l) => Ok(to_linear(&l.decode(code)?, &l.lut())),
            Self::Posit(p) => p.decode(code),
        }
    }

    pub fn decode_all(&self, codes: &[u64]) -> std::result::Result<Vec<Decoded>, (usize, Error)> {
        let lut = match self {
            Self::Log(l) => l.lut(),
            _ => Vec::new(),
        };
        codes
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                match self {
                    Self::Log(l) => l.decode(c).map(|d| to_linear(&d, &lut)),
                    _ => self.decode(c),
                }
                .map_err(|e| (i, e))
            })
            .collect()
    }

    /// Accumulator for plain sums of this format.
    pub fn sum_config(&self, k: u32, nv: u32) -> Result<AccumulatorConfig> {
        match self {
            Self::Float(f) => AccumulatorConfig::for_format(f, k, nv),
            Self::Log(l) => l.sum_config(k, nv),
            Self::Posit(p) => posit_accumulator(p, k, nv),
        }
    }

    /// Accumulator for exact products of two values of this format.
    pub fn product_config(&self, k: u32, nv: u32) -> Result<AccumulatorConfig> {
        match self {
            Self::Log(l) => l.mac_config(k, nv),
            _ => {
                let s = self.sum_config(0, nv)?;
                AccumulatorConfig::new(
                    s.index_bits + 1,
                    k,
                    nv,
                    2 * s.mantissa_bits + 1,
                    2 * s.value_scale,
                )
            }
        }
    }

    /// Exact (for log numbers, table-quantized) product of two codes,
    /// shaped for an accumulator from [`Self::product_config`].
    pub fn multiplier(&self) -> impl Fn(u64, u64) -> Result<Decoded> + '_ {
        let lut = match self {
            Self::Log(l) => l.lut(),
            _ => Vec::new(),
        };
        move |a, b| match self {
            Self::Log(l) => Ok(log_multiply(l, &lut, &l.decode(a)?, &l.decode(b)?)),
            _ => Ok(multiply(&self.decode(a)?, &self.decode(b)?)),
        }
    }

    pub fn to_exact(&self, d: &Decoded) -> Result<ExactValue> {
        Ok(d.to_exact(self.sum_config(0, 0)?.value_scale))
    }

    /// Largest useful `k` for sums (the single-register extreme).
    pub fn max_k(&self) -> u32 {
        self.sum_config(0, 0).map(|c| c.index_bits).unwrap_or(0)
    }
}

impl std::fmt::Display for NumberFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeStream {
    pub format: NumberFormat,
    pub codes: Vec<u64>,
}

impl CodeStream {
    pub fn new(format: NumberFormat, codes: Vec<u64>) -> Self {
        CodeStream { format, codes }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let id = self
            .format
            .id()
            .ok_or_else(|| Error::Stream(format!("format {} has no stream id", self.format)))?;
        let w = self.format.byte_width();
        let mut out = Vec::with_capacity(HEADER_LEN + w * self.codes.len());
        out.extend_from_slice(MAGIC);
        out.push(id);
        out.extend_from_slice(&(self.codes.len() as u64).to_le_bytes());
        for &c in &self.codes {
            if c >> self.format.bits() != 0 {
                return Err(Error::CodeOutOfRange {
                    code: c,
                    width: self.format.bits(),
                });
            }
            out.extend_from_slice(&c.to_le_bytes()[..w]);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Stream(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Stream("bad magic, expected EIA1".into()));
        }
        let format = NumberFormat::from_id(bytes[4])?;
        let count = u64::from_le_bytes(bytes[5..HEADER_LEN].try_into().unwrap());
        let w = format.byte_width();
        let payload = &bytes[HEADER_LEN..];
        if !payload.len().is_multiple_of(w) || (payload.len() / w) as u64 != count {
            return Err(Error::Stream(format!(
                "header declares {count} codes but the payload holds {} bytes ({} per code)",
                payload.len(),
                w
            )));
        }
        let codes = payload
            .chunks_exact(w)
            .map(|ch| {
                let mut b = [0u8; 8];
                b[..w].copy_from_slice(ch);
                u64::from_le_bytes(b)
            })
            .collect::<Vec<u64>>();
        if let Some((i, &c)) = codes.iter().enumerate().find(|(_, &c)| c >> format.bits() != 0) {
            return Err(Error::Stream(format!("code {c:#x} at offset {i} exceeds {} bits", format.bits())));
        }
        Ok(CodeStream { format, codes })
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in 0..=8 {
            let f = NumberFormat::from_id(id).unwrap();
            assert_eq!(f.id(), Some(id));
            assert_eq!(NumberFormat::by_name(&f.name()), Some(f));
        }
        assert!(NumberFormat::from_id(9).is_err());
    }

    #[test]
    fn bytes_round_trip() {
        let s = CodeStream::new(NumberFormat::from_id(0).unwrap(), vec![0x3F80_0000, 0xBF80_0000, 0]);
        let b = s.to_bytes().unwrap();
        assert_eq!(&b[..5], b"EIA1\x00");
        assert_eq!(b.len(), HEADER_LEN + 12);
        assert_eq!(CodeStream::from_bytes(&b).unwrap(), s);

        let s = CodeStream::new(NumberFormat::from_id(4).unwrap(), vec![]);
        assert_eq!(CodeStream::from_bytes(&s.to_bytes().unwrap()).unwrap(), s);
    }

    #[test]
    fn header_checks() {
        let s = CodeStream::new(NumberFormat::from_id(1).unwrap(), vec![0x3F80, 0x3F80]);
        let mut b = s.to_bytes().unwrap();
        assert!(CodeStream::from_bytes(&b[..HEADER_LEN + 3]).is_err());
        b.push(0);
        assert!(CodeStream::from_bytes(&b).is_err());
        assert!(CodeStream::from_bytes(b"EIA2\x01\0\0\0\0\0\0\0\0").is_err());
        assert!(CodeStream::from_bytes(b"EIA1").is_err());
        assert!(CodeStream::new(NumberFormat::from_id(3).unwrap(), vec![0x100]).to_bytes().is_err());
    }

    #[test]
    fn log_stream_decodes_through_table() {
        let f = NumberFormat::from_id(6).unwrap();
        // 0 100 000 = +2^4
        let d = f.decode(0b0010_0000).unwrap();
        assert_eq!(f.to_exact(&d).unwrap(), ExactValue::from_i64(16));
        assert!(f.decode(0).unwrap().is_zero);
    }

    #[test]
    fn product_configs() {
        let bf = NumberFormat::from_id(1).unwrap();
        let c = bf.product_config(3, 12).unwrap();
        assert_eq!((c.index_bits, c.mantissa_bits, c.value_scale), (9, 15, -268));
        let p = NumberFormat::from_id(8).unwrap().product_config(0, 12).unwrap();
        assert_eq!((p.index_bits, p.mantissa_bits, p.value_scale), (5, 11, -24));
    }
}
