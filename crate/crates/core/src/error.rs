use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid format parameters: {0}")]
    InvalidFormat(String),

    #[error("code {code:#x} does not fit in {width} bits")]
    CodeOutOfRange { code: u64, width: u32 },

    #[error("nonfinite code {code:#x} in format {format}")]
    Nonfinite { code: u64, format: String },

    #[error("posit NaR code {code:#x}")]
    NotAReal { code: u64 },

    #[error("cannot encode: {0}")]
    Unencodable(String),

    #[error("invalid accumulator configuration: {0}")]
    InvalidConfig(String),

    #[error("index {index} outside the {index_bits}-bit index space")]
    IndexOutOfRange { index: u32, index_bits: u32 },

    #[error("mantissa {mantissa:#x} wider than {bits} bits")]
    MantissaOutOfRange { mantissa: u64, bits: u32 },

    #[error("partial sum register {group} overflowed its {width}-bit range on input #{count}")]
    Overflow { group: usize, width: u32, count: u64 },

    #[error("fixed-point operand {value} exceeds the {bits}-bit magnitude width")]
    FixedOutOfRange { value: i64, bits: u32 },

    #[error("fixed-point scale 2^{0} cannot be mapped onto the exponent index space")]
    FixedScaleOutOfRange(i32),

    #[error("lane count mismatch: expected {expected}, got {got}")]
    LaneCount { expected: usize, got: usize },

    #[error("weight matrix is all zero; scale is undefined")]
    ZeroMatrix,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed stream: {0}")]
    Stream(String),

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
