//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream_id, replicate_id)`. The seed and
//! replicate id form the ChaCha key, the stream id selects the ChaCha
//! stream, so every triple maps to its own keystream and the normals drawn
//! from it do not depend on which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Address of an independent standard-normal sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
    pub replicate_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64, replicate_id: u64) -> Self {
        Self {
            seed,
            stream_id,
            replicate_id,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn with_replicate(self, replicate_id: u64) -> Self {
        Self {
            replicate_id,
            ..self
        }
    }

    pub fn normals(&self) -> NormalStream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replicate_id.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_id);
        NormalStream { rng }
    }
}

/// Source of standard-normal variates driving the Euler scheme.
pub trait NormalSource {
    fn next_normal(&mut self) -> f64;
}

/// Standard normals drawn from a ChaCha keystream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalSource for NormalStream {
    #[inline]
    fn next_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Always returns zero; turns the Euler scheme into explicit Euler for the ODE.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NormalSource for ZeroNoise {
    fn next_normal(&mut self) -> f64 {
        0.0
    }
}

/// Replays a fixed sequence of normals, then panics if exhausted.
#[derive(Debug, Clone)]
pub struct ReplayNoise {
    values: Vec<f64>,
    pos: usize,
}

impl ReplayNoise {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl NormalSource for ReplayNoise {
    fn next_normal(&mut self) -> f64 {
        let z = self.values[self.pos];
        self.pos += 1;
        z
    }
}

impl<S: NormalSource + ?Sized> NormalSource for &mut S {
    fn next_normal(&mut self) -> f64 {
        (**self).next_normal()
    }
}
