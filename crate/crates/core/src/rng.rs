//! Seeded random streams.
//!
//! Every Monte Carlo loop in the crate draws replicate `k` from stream `k` of
//! the run seed, so results do not depend on how replicates are scheduled
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for replicate `stream` of a run seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
