//! Seeded random streams.
//!
//! All randomness comes from ChaCha8, a counter-based generator. A run seed
//! selects the key and an integer stream id selects one of 2^64 independent
//! streams, so parallel workers can draw from `stream(seed, id)` and produce
//! output that does not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type HfRng = ChaCha8Rng;

pub fn stream(seed: u64, id: u64) -> HfRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
