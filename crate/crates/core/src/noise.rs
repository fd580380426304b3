//! Reproducible Gaussian noise, one independent stream per neuron.
//!
//! A stream is a ChaCha8 keystream selected by `(seed, stream id)`, where the
//! id is derived from the neuron's `(group, population, slot)` address and not
//! from its storage offset. The same neuron therefore sees the same Brownian
//! increments whatever the network size, storage layout or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::NeuronIndex;

const DIGEST_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const DIGEST_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Stream id of neuron `(i, a, p)`.
pub fn stream_id(idx: NeuronIndex) -> u64 {
    let group = (idx.group as i32) as u32 as u64;
    let population = (idx.population as u16) as u64;
    let slot = (idx.slot as i16) as u16 as u64;
    (group << 32) | (population << 16) | slot
}

/// Seed of replication `r` derived from a base seed (SplitMix64 finalizer).
pub fn replication_seed(base: u64, r: u64) -> u64 {
    let mut z = base.wrapping_add(r.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    seed: u64,
    id: u64,
    draws: u64,
    digest: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        NoiseStream {
            rng,
            seed,
            id,
            draws: 0,
            digest: DIGEST_OFFSET,
        }
    }

    pub fn for_neuron(seed: u64, idx: NeuronIndex) -> Self {
        NoiseStream::new(seed, stream_id(idx))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Number of standard normals consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Running hash of every variate consumed so far.
    pub fn digest(&self) -> u64 {
        self.digest
    }

    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.draws += 1;
        self.digest = (self.digest ^ z.to_bits()).wrapping_mul(DIGEST_PRIME);
        z
    }

    /// Brownian increment over `dt`, assembled from `substeps` fine
    /// increments of size `dt / substeps`. A run at step `dt` with
    /// `substeps = 2^k` follows the same Brownian path as a run at step
    /// `dt / 2^k` with `substeps = 1`.
    #[inline]
    pub fn increment(&mut self, dt: f64, substeps: u32) -> f64 {
        if substeps == 1 {
            return dt.sqrt() * self.next_normal();
        }
        let sum: f64 = (0..substeps).map(|_| self.next_normal()).sum();
        (dt / substeps as f64).sqrt() * sum
    }
}

/// Combined digest of several streams, order-sensitive.
pub fn combined_digest<'a>(streams: impl IntoIterator<Item = &'a NoiseStream>) -> u64 {
    streams.into_iter().fold(DIGEST_OFFSET, |h, s| {
        (h ^ s.digest()).wrapping_mul(DIGEST_PRIME) ^ s.draws()
    })
}
