//! Deterministic RNG stream derivation.
//!
//! Every stochastic component draws from a ChaCha stream addressed by
//! `(seed, stream index)`. Streams derived this way are independent of each
//! other and of execution order, which is what makes benchmark runs
//! reproducible under any worker count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a master seed and a tag path.
///
/// Used to give every benchmark cell (dataset, method, size, rep, fold) its
/// own seed so that cells are reproducible in isolation.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(master);
    for &t in tags {
        acc = splitmix64(acc ^ splitmix64(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    acc
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
