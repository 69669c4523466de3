//! C ABI for the exact accumulators.
//!
//! Handles are opaque and owned by the caller: every `*_new` pairs with a
//! `*_free`. Functions return an [`EiaccStatus`]; on failure a description is
//! available from [`eiacc_last_error`] on the same thread. Strings handed out
//! by the library are released with [`eiacc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eiacc::cost_model::{self, CostParams};
use eiacc::{Accumulator, Decoded, Error, ExactValue, NumberFormat, ReconstructionStrategy};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EiaccStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidCode = 3,
    Overflow = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EiaccStrategy {
    /// Visit every register.
    ExactFull = 0,
    /// Visit only the touched registers.
    ExactRange = 1,
    /// Visit the top `window` touched registers; lower bits are dropped.
    Window = 2,
}

/// Running sum of one code stream.
pub struct EiaccAccumulator {
    format: NumberFormat,
    acc: Accumulator,
}

/// Running sum of products of two code streams.
pub struct EiaccMac {
    format: NumberFormat,
    lut: Vec<u64>,
    acc: Accumulator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: EiaccStatus, msg: impl Into<String>) -> EiaccStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> EiaccStatus {
    match e {
        Error::Overflow { .. } => EiaccStatus::Overflow,
        Error::CodeOutOfRange { .. } | Error::Nonfinite { .. } | Error::NotAReal { .. } => EiaccStatus::InvalidCode,
        _ => EiaccStatus::InvalidArgument,
    }
}

fn from_error(e: Error) -> EiaccStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> EiaccStatus) -> EiaccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(EiaccStatus::Internal, "internal error (panic)"),
    }
}

fn strategy(s: EiaccStrategy, window: u32) -> ReconstructionStrategy {
    match s {
        EiaccStrategy::ExactFull => ReconstructionStrategy::ExactFull,
        EiaccStrategy::ExactRange => ReconstructionStrategy::ExactRange,
        EiaccStrategy::Window => ReconstructionStrategy::Window(window as usize),
    }
}

/// Writes the value to whichever outputs are non-null.
unsafe fn emit(v: &ExactValue, out_value: *mut f64, out_text: *mut *mut c_char) {
    if !out_value.is_null() {
        *out_value = v.to_f64();
    }
    if !out_text.is_null() {
        *out_text = CString::new(v.to_string()).map_or(ptr::null_mut(), CString::into_raw);
    }
}

/// Message for the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eiacc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn eiacc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn eiacc_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

/// Creates an accumulator for stream format `format_id` (same ids as the
/// binary stream header).
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn eiacc_accumulator_new(
    format_id: u8,
    k: u32,
    nv: u32,
    out: *mut *mut EiaccAccumulator,
) -> EiaccStatus {
    if out.is_null() {
        return fail(EiaccStatus::NullPointer, "out is null");
    }
    guard(|| {
        let made = NumberFormat::from_id(format_id).and_then(|format| {
            let acc = Accumulator::new(format.sum_config(k, nv)?)?;
            Ok(EiaccAccumulator { format, acc })
        });
        match made {
            Ok(h) => {
                *out = Box::into_raw(Box::new(h));
                EiaccStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `h` must be null or a live handle from [`eiacc_accumulator_new`].
#[no_mangle]
pub unsafe extern "C" fn eiacc_accumulator_free(h: *mut EiaccAccumulator) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Adds `len` codes. Stops at the first bad code or overflow; `consumed`
/// (if non-null) receives how many codes were absorbed before that.
///
/// # Safety
/// `h` must be a live handle and `codes` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn eiacc_accumulator_add(
    h: *mut EiaccAccumulator,
    codes: *const u64,
    len: usize,
    consumed: *mut usize,
) -> EiaccStatus {
    if h.is_null() || (codes.is_null() && len > 0) {
        return fail(EiaccStatus::NullPointer, "null handle or code buffer");
    }
    let h = &mut *h;
    let codes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(codes, len) };
    guard(|| {
        let mut done = 0;
        let r = codes.iter().try_for_each(|&c| {
            h.acc.accumulate(&h.format.decode(c)?)?;
            done += 1;
            Ok::<(), Error>(())
        });
        if !consumed.is_null() {
            *consumed = done;
        }
        match r {
            Ok(()) => EiaccStatus::Ok,
            Err(e) => fail(status_of(&e), format!("code at offset {done}: {e}")),
        }
    })
}

/// Nonzero inputs absorbed since the last reconstruction, or 0 for null.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eiacc_accumulator_count(h: *const EiaccAccumulator) -> u64 {
    h.as_ref().map_or(0, |h| h.acc.count())
}

/// Reads out the sum and clears the accumulator. `out_value` gets the
/// nearest double; `out_text` gets the exact value as
/// `<sign><hex significand> * 2^<exponent>`, to be freed with
/// [`eiacc_string_free`]. Either output may be null.
///
/// # Safety
/// `h` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eiacc_accumulator_reconstruct(
    h: *mut EiaccAccumulator,
    strategy_kind: EiaccStrategy,
    window: u32,
    out_value: *mut f64,
    out_text: *mut *mut c_char,
) -> EiaccStatus {
    let Some(h) = h.as_mut() else {
        return fail(EiaccStatus::NullPointer, "null handle");
    };
    guard(|| {
        let v = h.acc.reconstruct(strategy(strategy_kind, window));
        emit(&v, out_value, out_text);
        EiaccStatus::Ok
    })
}

/// Creates a multiply-accumulate unit for format `format_id`.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn eiacc_mac_new(format_id: u8, k: u32, nv: u32, out: *mut *mut EiaccMac) -> EiaccStatus {
    if out.is_null() {
        return fail(EiaccStatus::NullPointer, "out is null");
    }
    guard(|| {
        let made = NumberFormat::from_id(format_id).and_then(|format| {
            let acc = Accumulator::new(format.product_config(k, nv)?)?;
            let lut = match &format {
                NumberFormat::Log(l) => l.lut(),
                _ => Vec::new(),
            };
            Ok(EiaccMac { format, lut, acc })
        });
        match made {
            Ok(h) => {
                *out = Box::into_raw(Box::new(h));
                EiaccStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `h` must be null or a live handle from [`eiacc_mac_new`].
#[no_mangle]
pub unsafe extern "C" fn eiacc_mac_free(h: *mut EiaccMac) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

fn mac_product(h: &EiaccMac, a: u64, b: u64) -> Result<Decoded, Error> {
    match &h.format {
        NumberFormat::Log(l) => Ok(eiacc::lns::log_multiply(l, &h.lut, &l.decode(a)?, &l.decode(b)?)),
        f => Ok(eiacc::mac::multiply(&f.decode(a)?, &f.decode(b)?)),
    }
}

/// Accumulates `a[i] * b[i]` for `i < len`, stopping at the first failure.
///
/// # Safety
/// `h` must be a live handle; `a` and `b` must each point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn eiacc_mac_add(
    h: *mut EiaccMac,
    a: *const u64,
    b: *const u64,
    len: usize,
    consumed: *mut usize,
) -> EiaccStatus {
    if h.is_null() || (len > 0 && (a.is_null() || b.is_null())) {
        return fail(EiaccStatus::NullPointer, "null handle or operand buffer");
    }
    let h = &mut *h;
    let (a, b) = if len == 0 {
        (&[][..], &[][..])
    } else {
        (std::slice::from_raw_parts(a, len), std::slice::from_raw_parts(b, len))
    };
    guard(|| {
        let mut done = 0;
        let r = a.iter().zip(b).try_for_each(|(&x, &y)| {
            let p = mac_product(h, x, y)?;
            h.acc.accumulate(&p)?;
            done += 1;
            Ok::<(), Error>(())
        });
        if !consumed.is_null() {
            *consumed = done;
        }
        match r {
            Ok(()) => EiaccStatus::Ok,
            Err(e) => fail(status_of(&e), format!("pair at offset {done}: {e}")),
        }
    })
}

/// Reads out the dot product and clears the unit. Outputs as for
/// [`eiacc_accumulator_reconstruct`].
///
/// # Safety
/// `h` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eiacc_mac_reconstruct(
    h: *mut EiaccMac,
    out_value: *mut f64,
    out_text: *mut *mut c_char,
) -> EiaccStatus {
    let Some(h) = h.as_mut() else {
        return fail(EiaccStatus::NullPointer, "null handle");
    };
    guard(|| {
        let v = h.acc.reconstruct(ReconstructionStrategy::ExactRange);
        emit(&v, out_value, out_text);
        EiaccStatus::Ok
    })
}

/// Outputs that can toggle per clock for mantissa width `nm`.
#[no_mangle]
pub extern "C" fn eiacc_flip_count(nm: u32, k: u32, nv: u32) -> u64 {
    if nm > 64 || k > 16 || nv > 64 {
        set_error("parameters out of range");
        return 0;
    }
    cost_model::flip_count(nm, k, nv)
}

/// Gate estimate with the default cost parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eiacc_gate_count(ne: u32, nm: u32, k: u32, nv: u32, out: *mut u64) -> EiaccStatus {
    if out.is_null() {
        return fail(EiaccStatus::NullPointer, "out is null");
    }
    if ne > 16 || nm > 64 || nv > 64 {
        return fail(EiaccStatus::InvalidArgument, "parameters out of range");
    }
    match cost_model::gate_count(ne, nm, k, nv, &CostParams::default()) {
        Some(g) => {
            *out = g;
            EiaccStatus::Ok
        }
        None => fail(EiaccStatus::InvalidArgument, format!("k = {k} exceeds ne = {ne}")),
    }
}
