//! Counter-based random streams.
//!
//! Every Monte Carlo path draws from its own ChaCha8 stream selected by
//! `(seed, path index)`. The stream for a path never depends on how paths
//! are split across threads, which makes parallel runs bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// The random stream owned by path `path` of a run seeded with `seed`.
pub fn path_stream(seed: u64, path: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}
