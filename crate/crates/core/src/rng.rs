//! Counter-mode child streams.
//!
//! Every stochastic work item (a replication, a bootstrap draw) gets its own
//! ChaCha8 generator keyed by a tuple of integers. The key is a pure function
//! of the tuple so results never depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domain tags, used as the first path component after the root seed.
pub(crate) mod domain {
    pub const SIMULATE: u64 = 0x5349_4d55;
    pub const BOOTSTRAP: u64 = 0x424f_4f54;
    pub const DRAW: u64 = 0x4452_4157;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a path of integers into a single 64-bit key.
pub fn derive_key(root: u64, path: &[u64]) -> u64 {
    let mut state = root;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xD1B5_4A32_D192_ED03);
        acc = acc.rotate_left(23) ^ splitmix64(&mut state);
    }
    acc
}

/// A generator for the child stream at `path` below `root`.
pub fn child_stream(root: u64, path: &[u64]) -> StreamRng {
    let key = derive_key(root, path);
    let mut state = key;
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
