//! Deterministic RNG stream derivation.
//!
//! Every stochastic component draws from its own ChaCha stream derived from
//! the run seed plus a list of stream labels (stage ids, waypoint indices).
//! Two runs with the same seed produce bit-identical results regardless of
//! thread scheduling, because no stream is ever shared across tasks.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; good avalanche behaviour for key stretching.
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives an independent RNG from a base seed and a stream label path.
///
/// The label path is folded into the SplitMix64 state word by word, so
/// `stream(s, &[a, b])` and `stream(s, &[b, a])` differ.
pub fn stream(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09e667f3bcc908;
    let mut key = [0u8; 32];
    for &label in labels {
        state ^= splitmix64(&mut state) ^ label.wrapping_mul(0x2545f4914f6cdd1d);
    }
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream labels used by the mission executor and experiment harness.
/// Centralised so no two call sites collide.
pub mod stage {
    pub const WORLD_GEN: u64 = 1;
    pub const COVERAGE_IMAGE: u64 = 2;
    pub const INSPECTION_IMAGE: u64 = 3;
    pub const INSPECTION_PLAN: u64 = 4;
    pub const TRIAL_IMAGE: u64 = 5;
    pub const POSE_ERROR: u64 = 6;
}
