//! Reproducible random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 generator whose key is
//! derived from a user seed and a path of indices (for example
//! `[phi_index, trial, frame]`). Streams for different paths are independent,
//! so work can be split across threads in any way without changing results.

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for the stream identified by `seed` and `path`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = seed;
    let mut h = splitmix64(&mut state);
    for &p in path {
        state ^= h.rotate_left(17) ^ p;
        h = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
