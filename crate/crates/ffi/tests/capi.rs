use std::ffi::{c_char, CStr};
use std::ptr;

use eiacc_ffi::*;

unsafe fn take_string(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    eiacc_string_free(s);
    out
}

unsafe fn last_error() -> String {
    CStr::from_ptr(eiacc_last_error()).to_string_lossy().into_owned()
}

#[test]
fn accumulator_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(eiacc_accumulator_new(1, 3, 12, &mut h), EiaccStatus::Ok);
        let codes = [0x3F80u64, 0x3F80, 0x0000, 0xC000];
        let mut consumed = 0;
        assert_eq!(eiacc_accumulator_add(h, codes.as_ptr(), codes.len(), &mut consumed), EiaccStatus::Ok);
        assert_eq!(consumed, 4);
        // zeros are skipped
        assert_eq!(eiacc_accumulator_count(h), 3);

        let mut v = f64::NAN;
        let mut s = ptr::null_mut();
        assert_eq!(
            eiacc_accumulator_reconstruct(h, EiaccStrategy::ExactRange, 0, &mut v, &mut s),
            EiaccStatus::Ok
        );
        assert_eq!(v, 0.0);
        assert_eq!(take_string(s), "0 * 2^0");

        assert_eq!(eiacc_accumulator_add(h, codes.as_ptr(), 2, ptr::null_mut()), EiaccStatus::Ok);
        assert_eq!(
            eiacc_accumulator_reconstruct(h, EiaccStrategy::ExactFull, 0, &mut v, &mut s),
            EiaccStatus::Ok
        );
        assert_eq!((v, take_string(s)), (2.0, "+1 * 2^1".to_string()));
        eiacc_accumulator_free(h);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(eiacc_accumulator_new(42, 3, 12, &mut h), EiaccStatus::InvalidArgument);
        assert!(h.is_null());
        assert!(last_error().contains("42"));
        assert_eq!(eiacc_accumulator_new(1, 3, 12, ptr::null_mut()), EiaccStatus::NullPointer);

        assert_eq!(eiacc_accumulator_new(1, 0, 12, &mut h), EiaccStatus::Ok);
        let codes = [0x3F80u64, 0x7FC0, 0x3F80];
        let mut consumed = 99;
        assert_eq!(eiacc_accumulator_add(h, codes.as_ptr(), 3, &mut consumed), EiaccStatus::InvalidCode);
        assert_eq!(consumed, 1);
        assert!(last_error().contains("offset 1"));

        assert_eq!(eiacc_accumulator_reconstruct(ptr::null_mut(), EiaccStrategy::ExactRange, 0, ptr::null_mut(), ptr::null_mut()), EiaccStatus::NullPointer);
        assert_eq!(eiacc_accumulator_count(ptr::null()), 0);
        eiacc_accumulator_free(h);
        eiacc_accumulator_free(ptr::null_mut());
        eiacc_string_free(ptr::null_mut());
    }
}

#[test]
fn overflow_status() {
    unsafe {
        // e4m3 with 2 guard bits: 7-bit registers hold four maximal mantissas
        let mut h = ptr::null_mut();
        assert_eq!(eiacc_accumulator_new(4, 0, 2, &mut h), EiaccStatus::Ok);
        let codes = [0x77u64; 5];
        let mut consumed = 0;
        assert_eq!(eiacc_accumulator_add(h, codes.as_ptr(), 5, &mut consumed), EiaccStatus::Overflow);
        assert_eq!(consumed, 4);
        eiacc_accumulator_free(h);
    }
}

#[test]
fn mac_dot_products() {
    unsafe {
        // bf16: 1.5 * 2.0 + (-1.0) * 1.0
        let mut h = ptr::null_mut();
        assert_eq!(eiacc_mac_new(1, 4, 12, &mut h), EiaccStatus::Ok);
        let a = [0x3FC0u64, 0xBF80];
        let b = [0x4000u64, 0x3F80];
        assert_eq!(eiacc_mac_add(h, a.as_ptr(), b.as_ptr(), 2, ptr::null_mut()), EiaccStatus::Ok);
        let mut v = 0.0;
        let mut s = ptr::null_mut();
        assert_eq!(eiacc_mac_reconstruct(h, &mut v, &mut s), EiaccStatus::Ok);
        assert_eq!((v, take_string(s)), (2.0, "+1 * 2^1".to_string()));
        eiacc_mac_free(h);

        // log4.3: 2^0.5 * 2^0.5 = 2 exactly
        assert_eq!(eiacc_mac_new(6, 2, 12, &mut h), EiaccStatus::Ok);
        let a = [0b0000_0100u64];
        assert_eq!(eiacc_mac_add(h, a.as_ptr(), a.as_ptr(), 1, ptr::null_mut()), EiaccStatus::Ok);
        assert_eq!(eiacc_mac_reconstruct(h, &mut v, ptr::null_mut()), EiaccStatus::Ok);
        assert_eq!(v, 2.0);
        eiacc_mac_free(h);
    }
}

#[test]
fn cost_entry_points() {
    assert_eq!(eiacc_flip_count(23, 0, 12), 137);
    assert_eq!(eiacc_flip_count(7, 8, 12), 1093);
    let mut g = 0;
    unsafe {
        assert_eq!(eiacc_gate_count(8, 7, 7, 12, &mut g), EiaccStatus::Ok);
        assert_eq!(g, 4831);
        assert_eq!(eiacc_gate_count(3, 4, 4, 12, &mut g), EiaccStatus::InvalidArgument);
        assert_eq!(CStr::from_ptr(eiacc_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/eiacc.h")).unwrap();
    for name in [
        "eiacc_last_error",
        "eiacc_string_free",
        "eiacc_version",
        "eiacc_accumulator_new",
        "eiacc_accumulator_free",
        "eiacc_accumulator_add",
        "eiacc_accumulator_count",
        "eiacc_accumulator_reconstruct",
        "eiacc_mac_new",
        "eiacc_mac_free",
        "eiacc_mac_add",
        "eiacc_mac_reconstruct",
        "eiacc_flip_count",
        "eiacc_gate_count",
        "typedef struct EiaccAccumulator EiaccAccumulator",
        "EIACC_STATUS_OVERFLOW = 4",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
