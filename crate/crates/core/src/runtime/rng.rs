//! Deterministic random streams.
//!
//! The generator is xorshift64* (shifts 12, 25, 27; multiplier
//! `0x2545F4914F6CDD1D`). Independent substreams are seeded with
//! `splitmix64(seed ^ fnv1a64(label))`, so adding or removing one agent does
//! not shift the draws of another.

use serde::{Deserialize, Serialize};

const ZERO_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    /// A zero seed is remapped to a nonzero constant; xorshift never leaves 0.
    pub fn new(seed: u64) -> Self {
        SimRng {
            state: if seed == 0 { ZERO_SEED } else { seed },
        }
    }

    /// Substream for `label` under the run seed.
    pub fn substream(seed: u64, label: &str) -> Self {
        SimRng::new(splitmix64(seed ^ fnv1a64(label.as_bytes())))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// `next_u64() % n`. The modulo bias is part of the stream definition.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xorshift_vectors() {
        let mut r = SimRng::new(1);
        assert_eq!(r.next_u64(), 0x47e4_ce4b_896c_dd1d);
        assert_eq!(r.next_u64(), 0xabcf_a6a8_e079_651d);
        assert_eq!(r.next_u64(), 0xb9d1_0d8f_eb73_1f57);

        let mut r = SimRng::new(42);
        assert_eq!(r.next_u64(), 0x56ce_4ab7_719b_a3a0);
        assert_eq!(r.next_u64(), 0xc841_eb53_ebbb_2dda);
    }

    #[test]
    fn zero_seed_remapped() {
        let mut r = SimRng::new(0);
        assert_eq!(r.next_u64(), 0x0d83_b3e2_9a21_487a);
        assert_eq!(r.next_u64(), 0x54c4_4c79_f1fe_9d67);
    }

    #[test]
    fn mixers() {
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64(1), 0x910a_2dec_8902_5cc1);
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn substream() {
        let mut r = SimRng::substream(7, "infection");
        assert_eq!(r, SimRng::new(0xd1cd_e513_2ada_5854));
        let x = r.next_f64();
        assert!((x - 0.561_674_128_321_181_8).abs() < 1e-15);
    }
}
