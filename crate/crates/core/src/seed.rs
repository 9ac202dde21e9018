//! Seed derivation for reproducible, order-independent randomness.
//!
//! Every random stream in the simulator is keyed by a path of integers
//! (master seed, stream tag, round, device, ...). The key is folded through
//! SplitMix64 so that neighbouring paths give unrelated generator states, and
//! parallel workers can draw their own streams without coordination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags keep e.g. the batch sampler and the channel of the same
/// (round, device) from sharing a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Batch = 1,
    Phase = 2,
    Fading = 3,
    Noise = 4,
    Partition = 5,
    Init = 6,
    Synthetic = 7,
    Trial = 8,
    Voters = 9,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `master`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(master: u64, stream: Stream, parts: &[u64]) -> SimRng {
    let mut key = Vec::with_capacity(parts.len() + 1);
    key.push(stream as u64);
    key.extend_from_slice(parts);
    SimRng::seed_from_u64(derive_seed(master, &key))
}
