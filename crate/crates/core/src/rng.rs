//! Deterministic random streams keyed by (seed, replica, scale, block).
//!
//! Each key gets its own ChaCha8 generator, so results do not depend on the
//! order in which replicas, scales or blocks are processed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
    pub scale: u32,
    pub block: u32,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64, scale: u32, block: u32) -> Self {
        StreamKey { seed, replica, scale, block }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut state = self.seed;
        let mut key = [0u8; 32];
        let tag = ((self.scale as u64) << 32) | self.block as u64;
        let mut mix = splitmix64(&mut state) ^ tag;
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut mix).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.replica);
        rng
    }
}

/// Fills `out` with standard normal draws from the stream.
pub fn fill_normals(key: StreamKey, out: &mut [f64]) {
    let mut rng = key.rng();
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}
