//! Counter-based random streams.
//!
//! Every simulated path owns one [`RngStream`]. A stream is a ChaCha8 keystream
//! keyed by the seed and positioned on its own 64-bit stream id, so the draws a
//! path sees depend only on `(seed, stream_id)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream ids at or above this offset are reserved for initial-state draws.
pub const INIT_STREAM_OFFSET: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream used to draw the `index`-th initial state.
    pub fn for_initial_state(seed: u64, index: u64) -> Self {
        Self::new(seed, INIT_STREAM_OFFSET | index)
    }

    pub fn generator(&self) -> Sampler {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        Sampler { rng }
    }
}

/// Draw source handed to the model simulators.
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Standard normal conditioned on `[-bound, bound]`, by rejection.
    pub fn truncated_normal(&mut self, bound: f64) -> f64 {
        loop {
            let z = self.standard_normal();
            if z.abs() <= bound {
                return z;
            }
        }
    }

    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }
}

/// SplitMix64 finalizer; used to derive per-cell seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
