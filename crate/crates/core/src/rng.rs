//! Seeded random streams.
//!
//! Every particle name owns an independent ChaCha8 stream (stream id
//! `name + 1` under the run seed); stream 0 is reserved for sampling the
//! initial configuration. Normal variates come from the inverse CDF so that
//! each draw consumes exactly one 64-bit word, keeping per-particle streams
//! aligned no matter what values are drawn.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::special::inverse_phi;

/// Stream id used by the initial-configuration samplers.
pub const INITIAL_LAW_STREAM: u64 = 0;

/// Map 64 random bits to the open interval `(0, 1)`.
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// A ChaCha8 generator positioned on stream `id` of `seed`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    inverse_phi(unit_open(rng.next_u64()))
}

/// Exponential variate with the given rate (mean `1 / rate`).
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(unit_open(rng.next_u64())) / rate
}

/// One independent Gaussian stream per particle name.
#[derive(Clone)]
pub struct ParticleStreams {
    seed: u64,
    streams: Vec<ChaCha8Rng>,
}

impl ParticleStreams {
    pub fn new(seed: u64, n: usize) -> Self {
        let streams = (0..n as u64).map(|name| stream(seed, name + 1)).collect();
        Self { seed, streams }
    }

    /// Streams whose names are relabelled: particle `name` uses the stream
    /// that `ParticleStreams::new` would give to `relabel[name]`.
    pub fn relabelled(seed: u64, relabel: &[usize]) -> Self {
        let streams = relabel.iter().map(|&id| stream(seed, id as u64 + 1)).collect();
        Self { seed, streams }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    #[inline]
    pub fn normal(&mut self, name: usize) -> f64 {
        standard_normal(&mut self.streams[name])
    }
}
