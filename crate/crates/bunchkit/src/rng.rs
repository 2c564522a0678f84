//! Seed plumbing: independent substreams keyed by (seed, index) so that
//! parallel and serial runs draw identical randomness.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Substream `index` of the master `seed`. The stream id is set before any
/// draws, so the generator state depends only on the pair.
pub(crate) fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Uniform draw strictly inside (0, 1): 53 random bits centered on the
/// half-step, so inverse-CDF transforms never see 0 or 1.
pub(crate) fn unit_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}
