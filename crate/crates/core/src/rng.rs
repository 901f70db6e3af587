//! Counter-based random streams keyed by `(seed, tick, stream)`.
//!
//! A draw never depends on how many values other streams or earlier ticks
//! consumed, so adding a consumer cannot perturb existing ones.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent consumers of world randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Caregiver = 1,
    Scene = 2,
    Eval = 3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimRng {
    seed: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator positioned at the start of `stream` for `tick`. Each tick owns
    /// a window of 2^20 words in the stream.
    pub fn at(&self, tick: u64, stream: Stream) -> StreamRng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream as u64);
        inner.set_word_pos(u128::from(tick) << 20);
        StreamRng { inner }
    }
}

pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit_f64()
    }
}
