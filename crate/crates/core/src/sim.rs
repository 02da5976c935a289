//! Seeded, sharded random streams.
//!
//! Every Monte Carlo loop splits its draws into fixed-size shards. Shard `k`
//! always reads ChaCha stream `k` of the run seed, so results do not depend on
//! the number of worker threads. Shard results come back in shard order and
//! callers merge them sequentially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const SHARD_SIZE: u64 = 1 << 16;

/// Seed tags so the pilot, design and evaluation passes of one run draw
/// independent streams from a single user seed.
pub mod tag {
    pub const PILOT: u64 = 1;
    pub const REGION_STATS: u64 = 2;
    pub const EVALUATION: u64 = 3;
    pub const CONSTANT_DESIGN: u64 = 4;
    pub const UNDERLAY_CALIBRATION: u64 = 5;
}

/// SplitMix64 finalizer over `seed` and `tag`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(rng, count)` over `ceil(n / SHARD_SIZE)` shards in parallel and
/// returns the shard results in order.
pub fn sharded<T, F>(n: u64, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    let shards = n.div_ceil(SHARD_SIZE);
    (0..shards)
        .into_par_iter()
        .map(|k| {
            let count = SHARD_SIZE.min(n - k * SHARD_SIZE);
            let mut rng = stream_rng(seed, k);
            f(&mut rng, count)
        })
        .collect()
}
