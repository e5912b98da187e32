//! Seeded, splittable random streams.
//!
//! Every stochastic routine draws from a ChaCha8 stream keyed by `(seed, shard)`, so
//! results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator recorded in experiment metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), stream per shard";

/// Generator for shard `shard` of the experiment seeded with `seed`.
pub fn stream(seed: u64, shard: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard);
    rng
}
