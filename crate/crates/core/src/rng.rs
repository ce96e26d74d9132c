//! Counter-based random streams.
//!
//! A draw is addressed by `(seed, domain, stream, counter)`. The ChaCha key is
//! derived from `(seed, domain)`, the 64-bit ChaCha stream id is `stream` and
//! the keystream position is `counter << 32` words, so every `(stream, counter)`
//! cell owns 2^32 words of its own. For the sampler, `stream` is the chain
//! index and `counter` the global step, which makes each chain's noise a pure
//! function of `(seed, chain, step)` independent of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Domain tags keep independent uses of one seed from sharing keystreams.
pub mod domain {
    pub const CHAIN_INIT: u64 = 1;
    pub const LANGEVIN: u64 = 2;
    pub const PRIOR: u64 = 3;
    pub const DSM_NOISE: u64 = 4;
    pub const PROBES: u64 = 5;
    pub const PROJECTIONS: u64 = 6;
    pub const FIELD: u64 = 7;
    pub const FEATURES: u64 = 8;
    pub const REFERENCE: u64 = 9;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix64(seed ^ mix64(label.wrapping_add(GOLDEN)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamKey {
    key: [u8; 32],
}

impl StreamKey {
    pub fn new(seed: u64, domain: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed ^ mix64(domain);
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        StreamKey { key }
    }

    /// Generator positioned at cell `(stream, counter)`.
    pub fn rng(&self, stream: u64, counter: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(counter) << 32);
        rng
    }

    pub fn fill_normal(&self, stream: u64, counter: u64, out: &mut [f64]) {
        let mut rng = self.rng(stream, counter);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }

    pub fn normals(&self, stream: u64, counter: u64, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill_normal(stream, counter, &mut out);
        out
    }
}

/// Sequential generator for bulk draws that do not need random access.
pub fn seeded(seed: u64, domain: u64) -> ChaCha8Rng {
    StreamKey::new(seed, domain).rng(0, 0)
}
