//! Counter-based random streams.
//!
//! Every (run seed, worker, round, local step) tuple owns an independent
//! stream, so sampling is a pure function of the tuple and results do not
//! depend on worker scheduling or on how many draws other streams made.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic stream for one (seed, worker, round, step) cell.
pub fn step_stream(seed: u64, worker: u64, round: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    // Mix each coordinate in before drawing so distinct tuples get distinct keys.
    for (i, coord) in [worker, round, step].iter().enumerate() {
        state ^= coord.wrapping_mul(0xA076_1D64_78BD_642F ^ (i as u64 + 1));
        state = splitmix64(&mut state).wrapping_add(*coord);
    }
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform batch of `size` indices from `pool`, without replacement.
///
/// Partial Fisher-Yates over a copy of the pool; the result is sorted
/// ascending so downstream summation order is fixed.
pub fn sample_without_replacement(rng: &mut ChaCha8Rng, pool: &[usize], size: usize) -> Vec<usize> {
    assert!(size <= pool.len(), "batch larger than pool");
    let mut indices = pool.to_vec();
    for i in 0..size {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(size);
    indices.sort_unstable();
    indices
}

/// Uniformly random ordered draw without replacement, left unsorted.
///
/// Chunking this into consecutive blocks yields an exchangeable partition,
/// which the sorted variant would not (sorting groups similar indices into
/// the same block and biases across-block variance).
pub fn sample_ordered_without_replacement(
    rng: &mut ChaCha8Rng,
    pool: &[usize],
    size: usize,
) -> Vec<usize> {
    assert!(size <= pool.len(), "batch larger than pool");
    let mut indices = pool.to_vec();
    for i in 0..size {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(size);
    indices
}

/// Uniform batch of `size` indices from `pool`, with replacement (sorted).
pub fn sample_with_replacement(rng: &mut ChaCha8Rng, pool: &[usize], size: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..size)
        .map(|_| pool[rng.gen_range(0..pool.len())])
        .collect();
    indices.sort_unstable();
    indices
}
