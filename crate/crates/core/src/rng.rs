//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key packs the user seed
//! together with a domain tag and a counter (the sweep iteration for sampler
//! blocks), and the 64-bit ChaCha stream selector carries the per-index stream
//! id. Two streams with different `(seed, domain, counter, stream_id)` tuples
//! therefore never overlap, and a block update that draws from
//! `stream(index)` gives the same numbers whichever worker runs it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::keyed(seed, 0, 0, stream_id)
    }

    /// Stream for `stream_id` inside the `(domain, counter)` family of `seed`.
    pub fn keyed(seed: u64, domain: u64, counter: u64, stream_id: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&domain.to_le_bytes());
        key[16..24].copy_from_slice(&counter.to_le_bytes());
        key[24..32].copy_from_slice(b"mixirt\0\0");
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream_id);
        Self { seed, stream_id, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Domain tags that partition the key space of one seed.
pub(crate) mod domain {
    pub const SWEEP: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SIMULATE: u64 = 3;
    pub const WARMUP: u64 = 4;
}
