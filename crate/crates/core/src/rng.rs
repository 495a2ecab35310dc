//! Seeded random streams.
//!
//! The generator is xoshiro256** with its 256-bit state expanded from a 64-bit
//! seed by splitmix64. Integer draws in a range use rejection sampling on the
//! raw 64-bit output, and shuffles are a plain Fisher-Yates written here, so
//! a given seed yields the same stream on every platform and release.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256StarStar,
}

/// Deterministic generator for `seed`; `None` draws a seed from OS entropy.
pub fn rng_from_seed(seed: Option<u64>) -> SeededRng {
    SeededRng::new(seed.unwrap_or_else(entropy_seed))
}

pub fn entropy_seed() -> u64 {
    rand::random()
}

/// One splitmix64 step, used to derive independent substream seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: Xoshiro256StarStar::seed_from_u64(seed) }
    }

    /// Substream keyed by `(key, index)`. Streams for different indices are
    /// independent of the order in which they are created.
    pub fn substream(key: u64, index: u64) -> Self {
        SeededRng::new(splitmix64(key ^ splitmix64(index)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        // reject the top partial block so every residue is equally likely
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            xs.swap(i, j);
        }
    }

    /// Picks `k` distinct elements of `xs` by a partial Fisher-Yates pass and
    /// moves them to the front. Returns the chosen prefix.
    pub fn choose_prefix<'a, T>(&mut self, xs: &'a mut [T], k: usize) -> &'a [T] {
        let n = xs.len();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            xs.swap(i, j);
        }
        &xs[..k]
    }
}
