//! Counter-keyed random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream whose seed is the
//! user seed and whose stream id is a hash of a structural key (grid point,
//! trial index, ...). Results therefore never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into one 64-bit stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(GOLDEN, |acc, &p| mix(acc.wrapping_add(GOLDEN) ^ mix(p)))
}

/// The stream for `key` under `seed`.
pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(key));
    rng
}
