//! Seeded uniform example selection.
//!
//! Indices come from a ChaCha8 stream seeded with `seed_from_u64`, mapped to
//! `0..n` by the multiply-shift rule `(x * n) >> 64`. Output-time draws use a
//! separate stream of the same seed so they never perturb the index sequence.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    n: usize,
}

impl Sampler {
    pub fn new(seed: u64, n: usize) -> Self {
        assert!(n > 0, "cannot sample from an empty dataset");
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            n,
        }
    }

    pub fn next_index(&mut self) -> usize {
        scale_to(self.rng.next_u64(), self.n as u64) as usize
    }
}

/// A uniform draw from `lo..hi` on the output stream of `seed`.
pub fn output_draw(seed: u64, lo: u64, hi: u64) -> u64 {
    assert!(hi > lo, "empty output range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    lo + scale_to(rng.next_u64(), hi - lo)
}

fn scale_to(x: u64, n: u64) -> u64 {
    ((x as u128 * n as u128) >> 64) as u64
}
