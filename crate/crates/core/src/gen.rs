//! Seeded generators for random finite code streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::stream::NumberFormat;
use crate::tensor_core::{CodeMatrix, DIM};

pub const DEFAULT_SEED: u64 = 0x5EED_E1AC;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform over all codes that decode to a real number (zero included).
pub fn random_code(fmt: &NumberFormat, rng: &mut impl Rng) -> u64 {
    let mask = if fmt.bits() == 64 { u64::MAX } else { (1u64 << fmt.bits()) - 1 };
    loop {
        let c = rng.gen::<u64>() & mask;
        if fmt.decode(c).is_ok() {
            return c;
        }
    }
}

pub fn random_codes(fmt: &NumberFormat, n: usize, rng: &mut impl Rng) -> Vec<u64> {
    (0..n).map(|_| random_code(fmt, rng)).collect()
}

pub fn random_bf16_matrix(rng: &mut impl Rng) -> CodeMatrix {
    let bf = NumberFormat::from_id(1).expect("bf16 id");
    let mut m = [[0u64; DIM]; DIM];
    for row in m.iter_mut() {
        for c in row.iter_mut() {
            *c = random_code(&bf, rng);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_finite_and_reproducible() {
        for id in 0..=8 {
            let f = NumberFormat::from_id(id).unwrap();
            let a = random_codes(&f, 500, &mut rng(7));
            assert!(a.iter().all(|&c| f.decode(c).is_ok()));
            assert_eq!(a, random_codes(&f, 500, &mut rng(7)));
        }
    }
}
