//! Counter-based Gaussian variates.
//!
//! A ChaCha stream is selected by `(seed, stream)` and positioned by a block
//! counter, so every variate is a pure function of `(seed, stream, block)`
//! and paths can be generated in any order or in parallel.

use std::f64::consts::TAU;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct CounterNormals {
    rng: ChaCha8Rng,
    per_block: usize,
}

impl CounterNormals {
    /// `per_block` normals are reserved for every counter value.
    pub fn new(seed: u64, stream: u64, per_block: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, per_block }
    }

    fn uniform_open(&mut self) -> f64 {
        // (0, 1]: never zero, so the logarithm below is finite
        (((self.rng.next_u64() >> 11) + 1) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    /// Fills `out` (length at most `per_block`) with the normals of `block`.
    pub fn fill(&mut self, block: u64, out: &mut [f64]) {
        debug_assert!(out.len() <= self.per_block);
        let pairs = self.per_block.div_ceil(2) as u128;
        // two u64 per uniform pair, four 32-bit words per u64 pair
        self.rng.set_word_pos(block as u128 * pairs * 4);
        for chunk in out.chunks_mut(2) {
            let r = (-2.0 * self.uniform_open().ln()).sqrt();
            let angle = TAU * self.uniform_open();
            chunk[0] = r * angle.cos();
            if chunk.len() > 1 {
                chunk[1] = r * angle.sin();
            }
        }
    }
}
