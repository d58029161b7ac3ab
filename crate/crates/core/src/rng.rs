//! Seed derivation.
//!
//! A `SeedSpec` is a master seed plus a path of labels. Each label is hashed
//! with 64-bit FNV-1a and folded into the state with SplitMix64. The final
//! state expands (four more SplitMix64 outputs, little-endian) into the
//! 32-byte key of a ChaCha8 stream cipher, which is counter based, so the same
//! (seed, path) gives the same draws on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    #[serde(default)]
    pub path: Vec<String>,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        Self { master, path: Vec::new() }
    }

    pub fn child(&self, label: impl std::fmt::Display) -> Self {
        let mut path = self.path.clone();
        path.push(label.to_string());
        Self { master: self.master, path }
    }

    /// Folded 64-bit seed for this path.
    pub fn derive(&self) -> u64 {
        let mut state = self.master;
        let mut out = splitmix64(&mut state);
        for label in &self.path {
            state ^= fnv1a(label.as_bytes()) ^ out;
            out = splitmix64(&mut state);
        }
        out
    }

    pub fn rng(&self) -> Rng {
        rng_from_u64(self.derive())
    }
}

pub fn rng_from_u64(seed: u64) -> Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
