//! Fixed-width two's-complement register file.
//!
//! Each register is `width` bits wide and stored in enough 64-bit limbs to
//! hold `width + 1` bits, so a single add of an in-range operand never wraps
//! and overflow can be detected after the fact.

use num_bigint::{BigInt, Sign as BigSign};
use num_traits::Zero;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    width: u32,
    limbs_per_reg: usize,
    data: Vec<u64>,
}

/// The register would leave its signed `width`-bit range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterOverflow;

impl RegisterFile {
    pub fn new(count: usize, width: u32) -> Self {
        assert!(width >= 2, "register width must be at least 2 bits");
        let limbs_per_reg = (width as usize + 1).div_ceil(64);
        RegisterFile {
            width,
            limbs_per_reg,
            data: vec![0; count * limbs_per_reg],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.limbs_per_reg
    }

    fn reg_mut(&mut self, g: usize) -> &mut [u64] {
        let l = self.limbs_per_reg;
        &mut self.data[g * l..(g + 1) * l]
    }

    fn reg(&self, g: usize) -> &[u64] {
        let l = self.limbs_per_reg;
        &self.data[g * l..(g + 1) * l]
    }

    /// Adds `(-1)^negative * magnitude * 2^shift` to register `g`.
    /// On overflow the register is left unchanged.
    pub fn add_shifted(
        &mut self,
        g: usize,
        magnitude: u64,
        shift: u32,
        negative: bool,
    ) -> Result<(), RegisterOverflow> {
        let limb = (shift / 64) as usize;
        let off = shift % 64;
        let lo = magnitude << off;
        let hi = if off == 0 { 0 } else { magnitude >> (64 - off) };
        let width = self.width;
        let reg = self.reg_mut(g);
        if limb >= reg.len() || (hi != 0 && limb + 1 >= reg.len()) {
            return Err(RegisterOverflow);
        }
        if negative {
            sub_at(reg, limb, lo, hi);
        } else {
            add_at(reg, limb, lo, hi);
        }
        if fits(reg, width) {
            Ok(())
        } else {
            if negative {
                add_at(reg, limb, lo, hi);
            } else {
                sub_at(reg, limb, lo, hi);
            }
            Err(RegisterOverflow)
        }
    }

    /// Adds an arbitrary signed value to register `g`.
    pub fn add_big(&mut self, g: usize, v: &BigInt) -> Result<(), RegisterOverflow> {
        if v.is_zero() {
            return Ok(());
        }
        let l = self.limbs_per_reg;
        let digits = v.magnitude().to_u64_digits();
        if digits.len() > l {
            return Err(RegisterOverflow);
        }
        let negative = v.sign() == BigSign::Minus;
        let width = self.width;
        let reg = self.reg_mut(g);
        let before = reg.to_vec();
        let mut carry = false;
        for i in 0..l {
            let d = digits.get(i).copied().unwrap_or(0);
            if negative {
                let (r, b1) = reg[i].overflowing_sub(d);
                let (r, b2) = r.overflowing_sub(carry as u64);
                reg[i] = r;
                carry = b1 || b2;
            } else {
                let (r, c1) = reg[i].overflowing_add(d);
                let (r, c2) = r.overflowing_add(carry as u64);
                reg[i] = r;
                carry = c1 || c2;
            }
        }
        if fits(reg, width) {
            Ok(())
        } else {
            reg.copy_from_slice(&before);
            Err(RegisterOverflow)
        }
    }

    #[cfg(test)]
    fn is_zero_at(&self, g: usize) -> bool {
        self.reg(g).iter().all(|&w| w == 0)
    }

    /// Signed value of register `g`.
    pub fn get(&self, g: usize) -> BigInt {
        let reg = self.reg(g);
        let negative = (reg[reg.len() - 1] >> 63) == 1;
        if !negative {
            return BigInt::from_slice(BigSign::Plus, &to_u32_digits(reg));
        }
        // magnitude = ~reg + 1
        let mut mag: Vec<u64> = reg.iter().map(|w| !w).collect();
        for w in mag.iter_mut() {
            let (r, c) = w.overflowing_add(1);
            *w = r;
            if !c {
                break;
            }
        }
        BigInt::from_slice(BigSign::Minus, &to_u32_digits(&mag))
    }

    pub fn clear(&mut self, g: usize) {
        self.reg_mut(g).fill(0);
    }

    pub fn clear_all(&mut self) {
        self.data.fill(0);
    }
}

fn to_u32_digits(limbs: &[u64]) -> Vec<u32> {
    limbs
        .iter()
        .flat_map(|&w| [w as u32, (w >> 32) as u32])
        .collect()
}

fn add_at(reg: &mut [u64], limb: usize, lo: u64, hi: u64) {
    let (r, c) = reg[limb].overflowing_add(lo);
    reg[limb] = r;
    let mut carry = c as u64;
    let mut addend = hi;
    for w in reg[limb + 1..].iter_mut() {
        let (r1, c1) = w.overflowing_add(addend);
        let (r2, c2) = r1.overflowing_add(carry);
        *w = r2;
        carry = (c1 || c2) as u64;
        addend = 0;
        if carry == 0 {
            break;
        }
    }
}

fn sub_at(reg: &mut [u64], limb: usize, lo: u64, hi: u64) {
    let (r, b) = reg[limb].overflowing_sub(lo);
    reg[limb] = r;
    let mut borrow = b as u64;
    let mut sub = hi;
    for w in reg[limb + 1..].iter_mut() {
        let (r1, b1) = w.overflowing_sub(sub);
        let (r2, b2) = r1.overflowing_sub(borrow);
        *w = r2;
        borrow = (b1 || b2) as u64;
        sub = 0;
        if borrow == 0 {
            break;
        }
    }
}

/// True when bits `[width-1, 64*len)` are all copies of the sign bit.
fn fits(reg: &[u64], width: u32) -> bool {
    let top = reg.len() * 64;
    let sign = reg[reg.len() - 1] >> 63;
    let fill = if sign == 1 { u64::MAX } else { 0 };
    let first = (width - 1) as usize;
    let first_limb = first / 64;
    let off = first % 64;
    let mask = u64::MAX << off;
    if reg[first_limb] & mask != fill & mask {
        return false;
    }
    reg[first_limb + 1..top / 64].iter().all(|&w| w == fill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn signed_range_is_enforced() {
        let mut rf = RegisterFile::new(1, 8);
        // [-128, 127]
        rf.add_shifted(0, 127, 0, false).unwrap();
        assert_eq!(rf.add_shifted(0, 1, 0, false), Err(RegisterOverflow));
        assert_eq!(rf.get(0), BigInt::from(127));
        rf.add_shifted(0, 255, 0, true).unwrap();
        assert_eq!(rf.get(0), BigInt::from(-128));
        assert_eq!(rf.add_shifted(0, 1, 0, true), Err(RegisterOverflow));
        assert_eq!(rf.get(0), BigInt::from(-128));
    }

    #[test]
    fn wide_registers_cross_limbs() {
        let mut rf = RegisterFile::new(2, 300);
        rf.add_shifted(1, 0xFF, 250, false).unwrap();
        assert_eq!(rf.get(1), BigInt::from(0xFF) << 250u32);
        rf.add_shifted(1, 0x1FF, 250, true).unwrap();
        assert_eq!(rf.get(1), -(BigInt::from(0x100) << 250u32));
        assert!(rf.is_zero_at(0));
        rf.clear(1);
        assert!(rf.is_zero_at(1));
    }

    proptest! {
        #[test]
        fn matches_bigint(ops in proptest::collection::vec((any::<u32>(), 0u32..120, any::<bool>()), 1..60)) {
            let width = 160;
            let mut rf = RegisterFile::new(1, width);
            let mut model = BigInt::zero();
            let lim = BigInt::from(1) << (width - 1);
            for (m, s, neg) in ops {
                let v = BigInt::from(m) << s;
                let v = if neg { -v } else { v };
                let next = &model + &v;
                let ok = next >= -lim.clone() && next < lim;
                prop_assert_eq!(rf.add_shifted(0, m as u64, s, neg).is_ok(), ok);
                if ok { model = next; }
                prop_assert_eq!(rf.get(0), model.clone());
            }
        }

        #[test]
        fn add_big_matches_bigint(vals in proptest::collection::vec(any::<i64>(), 1..40)) {
            let mut rf = RegisterFile::new(1, 70);
            let mut model = BigInt::zero();
            for v in vals {
                let b = BigInt::from(v);
                rf.add_big(0, &b).unwrap();
                model += b;
                prop_assert_eq!(rf.get(0), model.clone());
            }
        }
    }
}
