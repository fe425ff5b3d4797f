//! Counter-based random streams.
//!
//! Sampling is split into fixed-size chunks of rows. Chunk `c` of a run with
//! seed `s` always reads ChaCha8 keyed by `s` on stream `c`, so the output of
//! a run does not depend on how many workers process the chunks.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Rows per chunk. Part of the reproducibility contract: changing it changes
/// every sampled value.
pub const CHUNK_ROWS: usize = 4096;

/// Stream tags keep chunked sampling and auxiliary draws (random operators,
/// Monte Carlo trials) from sharing key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Samples = 0,
    Auxiliary = 1,
}

pub struct ChunkRng {
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl ChunkRng {
    pub fn new(seed: u64, chunk: u64) -> Self {
        Self::tagged(seed, StreamTag::Samples, chunk)
    }

    pub fn tagged(seed: u64, tag: StreamTag, chunk: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8] = tag as u8;
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(chunk);
        Self {
            inner,
            spare_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    fn uniform_open_zero(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Fair `±1`.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Standard normal via the Box–Muller transform; the second variate of
    /// each pair is kept for the next call.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform_open_zero().ln()).sqrt();
        let angle = std::f64::consts::TAU * self.uniform();
        let (s, c) = angle.sin_cos();
        self.spare_normal = Some(radius * s);
        radius * c
    }
}

/// Number of chunks covering `n` rows.
pub fn chunk_count(n: usize) -> usize {
    n.div_ceil(CHUNK_ROWS)
}

/// Row range `[start, end)` of chunk `c` in a run of `n` rows.
pub fn chunk_rows(n: usize, c: usize) -> std::ops::Range<usize> {
    let start = c * CHUNK_ROWS;
    start..(start + CHUNK_ROWS).min(n)
}
