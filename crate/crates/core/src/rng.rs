//! Counter-based random substreams.
//!
//! Every `(path, step)` pair owns a ChaCha8 keystream position that is a pure
//! function of the master seed, so simulated values never depend on how work
//! is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per step inside a path's stream.
const STEP_STRIDE_LOG2: u32 = 36;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expands a 64-bit master seed into a 256-bit ChaCha key.
pub fn expand_seed(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

#[derive(Clone)]
pub struct StreamFactory {
    key: [u8; 32],
    domain: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        Self::with_domain(seed, 0)
    }

    /// Independent family of streams for the same seed (e.g. audits vs. simulation).
    pub fn with_domain(seed: u64, domain: u64) -> Self {
        Self {
            key: expand_seed(seed),
            domain,
        }
    }

    /// Generator positioned at the start of the `(path, step)` substream.
    pub fn substream(&self, path: usize, step: usize) -> ChaCha8Rng {
        assert!((step as u128) < (1u128 << (64 - STEP_STRIDE_LOG2)), "step index too large");
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream((path as u64) ^ self.domain.rotate_left(48));
        rng.set_word_pos((step as u128) << STEP_STRIDE_LOG2);
        rng
    }
}
