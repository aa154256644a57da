//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the user seed (expanded with
//! `SeedableRng::seed_from_u64`) and selected by a 64-bit stream id, so
//! independent chains never share key-stream material and records are the
//! same on every platform. Normal deviates use the Box-Muller transform:
//! a fixed two-uniforms-per-pair cost with no rejection loop.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids are `chain * STREAMS_PER_CHAIN + role`.
pub const STREAMS_PER_CHAIN: u64 = 4;

/// What a stream is used for within one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Outcome = 0,
    Jitter = 1,
}

pub fn stream_id(chain: u64, role: StreamRole) -> u64 {
    chain * STREAMS_PER_CHAIN + role as u64
}

#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn for_chain(seed: u64, chain: u64, role: StreamRole) -> Self {
        Self::new(seed, stream_id(chain, role))
    }

    /// Uniform on `(0, 1]` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}
