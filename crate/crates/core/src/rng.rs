//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`RandomStream`], a ChaCha8
//! generator keyed by a 64-bit seed and positioned on an independent 64-bit
//! stream. Work that is split across threads gives each unit (one OOD sample,
//! one training run) its own stream id, so results never depend on how work
//! is scheduled.
//!
//! Normal variates use `rand_distr::StandardNormal` (ziggurat). The exact
//! `rand_distr` version is pinned in `Cargo.lock`, which fixes the mapping
//! from stream bytes to normal draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream-id namespaces, so different consumers of one seed never overlap.
pub mod domain {
    pub const SAMPLER: u64 = 0x5342_4f00_0000_0000;
    pub const SYNTH: u64 = 0x5359_4e00_0000_0000;
    pub const SUBSAMPLE: u64 = 0x5355_4200_0000_0000;
    pub const DETECTOR: u64 = 0x4445_5400_0000_0000;
    pub const CHECK: u64 = 0x4348_4b00_0000_0000;
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`. `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
