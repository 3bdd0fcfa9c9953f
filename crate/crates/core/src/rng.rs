//! Deterministic random streams.
//!
//! Every random decision in the simulator draws from a stream identified by a
//! `(seed, stream_id)` pair. Work items get their own stream (one per
//! reference, pool entry or read), so the output is identical whether the
//! items are processed sequentially or split across any number of threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Sequence;

/// A ChaCha8 keystream fixed by `(master_seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
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

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Key from the master seed, ChaCha stream number from `stream_id`.
pub fn derive_stream(master_seed: u64, stream_id: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
    inner.set_stream(stream_id);
    RngStream { master_seed, stream_id, inner }
}

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hierarchical seed namespace: a pipeline phase derives a child seed, and
/// work items within the phase take streams off that child.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree(u64);

impl SeedTree {
    pub fn new(master_seed: u64) -> Self {
        Self(master_seed)
    }

    pub fn seed(self) -> u64 {
        self.0
    }

    pub fn child(self, tag: u64) -> Self {
        Self(splitmix64(self.0 ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn stream(self, stream_id: u64) -> RngStream {
        derive_stream(self.0, stream_id)
    }
}

/// FNV-1a over the bases, finished with a splitmix round. Stable across
/// platforms and releases; used to key per-entry streams by content.
pub fn sequence_hash(seq: &Sequence) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in seq.bases() {
        h ^= b as u64 + 1;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(h ^ seq.len() as u64)
}
