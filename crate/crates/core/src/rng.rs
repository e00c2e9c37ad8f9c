//! Reproducible random number streams.
//!
//! Every stochastic routine in this crate draws from a ChaCha12 stream
//! keyed by `(seed, stream index)`. Replications, paths, and worker
//! threads each get their own stream index, so results are bit-identical
//! regardless of thread count or evaluation order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A deterministic generator for the given `(seed, stream)` key.
pub fn stream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One standard normal draw.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
