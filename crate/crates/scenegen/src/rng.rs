//! Deterministic stream derivation: one run seed fans out to per-component,
//! per-iteration, per-worker generators.
//!
//! Every random draw in the system comes from a ChaCha8 generator seeded by
//! `derive(run_seed, tags)`. Because the derivation is stateless, resuming a
//! run at iteration `k` regenerates exactly the streams an uninterrupted run
//! would have used from `k` onward.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed tags naming the independent streams of a run.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Init,
    Data,
    Rollout,
    DiscStep,
    Eval,
    Sample,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Init => 0x01,
            Stream::Data => 0x02,
            Stream::Rollout => 0x03,
            Stream::DiscStep => 0x04,
            Stream::Eval => 0x05,
            Stream::Sample => 0x06,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mixes the run seed and stream coordinates into a 256-bit ChaCha seed.
pub fn derive(run_seed: u64, stream: Stream, coords: &[u64]) -> ChaCha8Rng {
    let mut acc = splitmix(run_seed ^ 0xa5a5_a5a5_5a5a_5a5a);
    acc = splitmix(acc ^ stream.tag());
    for &c in coords {
        acc = splitmix(acc ^ c);
    }
    let mut seed = [0u8; 32];
    let mut word = acc;
    for chunk in seed.chunks_mut(8) {
        word = splitmix(word);
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// 64-bit FNV-1a, used for config hashes and checkpoint integrity words.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
