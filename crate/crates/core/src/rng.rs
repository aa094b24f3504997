//! Random-number plumbing.
//!
//! Every stochastic routine takes a caller-supplied `RngCore`. Parallel work
//! derives its generators from a key `(seed, stream, a, b)` so the draws a
//! worker sees never depend on scheduling or thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Uniform draw on the open interval (0, 1), built from the top 52 bits so
/// that every midpoint `(m + 1/2) 2^-52` is exactly representable.
#[inline]
pub fn open_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / 4_503_599_627_370_496.0)
}

/// Standard exponential draw.
#[inline]
pub fn exp1<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    -open_uniform(rng).ln()
}

#[inline]
pub fn std_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_normal<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for o in out {
        *o = std_normal(rng);
    }
}

/// Generator for the key `(seed, stream, a, b)`; distinct keys give
/// independent ChaCha streams.
pub fn keyed_rng(seed: u64, stream: u64, a: u64, b: u64) -> StreamRng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, stream, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// A generator that replays a fixed list of uniforms, cycling when exhausted.
/// Values are encoded so that `open_uniform` returns them to within 2^-52.
#[derive(Debug, Clone)]
pub struct ReplayRng {
    words: Vec<u64>,
    pos: usize,
}

impl ReplayRng {
    pub fn new(uniforms: &[f64]) -> Self {
        assert!(!uniforms.is_empty(), "replay list must be non-empty");
        let words = uniforms
            .iter()
            .map(|&u| {
                assert!(u > 0.0 && u < 1.0, "replayed uniform {u} not in (0, 1)");
                let m = (u * 4_503_599_627_370_496.0 - 0.5).round().max(0.0) as u64;
                m.min((1u64 << 52) - 1) << 12
            })
            .collect();
        Self { words, pos: 0 }
    }
}

impl RngCore for ReplayRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let w = self.words[self.pos];
        self.pos = (self.pos + 1) % self.words.len();
        w
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}
