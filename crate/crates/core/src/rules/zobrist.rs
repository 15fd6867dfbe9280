//! Zobrist keys derived from a fixed splitmix64 stream.
//!
//! Key layout, in draw order from a splitmix64 generator whose initial state
//! is [`ZOBRIST_SEED`]:
//!
//! 1. for every point index `p = row * 19 + col` in `0..361`, one key for a
//!    black stone then one key for a white stone (722 draws);
//! 2. the black-to-move key;
//! 3. the white-to-move key.
//!
//! A position hash is the XOR of the keys of all occupied points and the key
//! of the side to move. The layout is part of the cache file format, so it
//! must never change.

use std::sync::OnceLock;

use super::{Color, NUM_POINTS};

pub const ZOBRIST_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 (Steele, Lea, Flood).
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

pub(crate) struct ZobristKeys {
    stones: [[u64; 2]; NUM_POINTS],
    side: [u64; 2],
}

impl ZobristKeys {
    fn generate() -> Self {
        let mut rng = SplitMix64::new(ZOBRIST_SEED);
        let mut stones = [[0u64; 2]; NUM_POINTS];
        for slot in stones.iter_mut() {
            slot[0] = rng.next_u64();
            slot[1] = rng.next_u64();
        }
        let black = rng.next_u64();
        let white = rng.next_u64();
        Self {
            stones,
            side: [black, white],
        }
    }

    #[inline]
    pub(crate) fn stone(&self, index: usize, color: Color) -> u64 {
        self.stones[index][color.index()]
    }

    #[inline]
    pub(crate) fn side(&self, color: Color) -> u64 {
        self.side[color.index()]
    }
}

pub(crate) fn keys() -> &'static ZobristKeys {
    static KEYS: OnceLock<ZobristKeys> = OnceLock::new();
    KEYS.get_or_init(ZobristKeys::generate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // Reference output of splitmix64 seeded with 1234567 (Vigna's C code).
        let mut rng = SplitMix64::new(1234567);
        assert_eq!(rng.next_u64(), 6457827717110365317);
        assert_eq!(rng.next_u64(), 3203168211198807973);
        assert_eq!(rng.next_u64(), 9817491932198370423);
    }

    #[test]
    fn keys_are_distinct() {
        let k = keys();
        let mut all: Vec<u64> = k.stones.iter().flat_map(|s| s.iter().copied()).collect();
        all.extend(k.side);
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), n);
    }
}
