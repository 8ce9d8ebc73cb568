//! Counter-based random streams. Every replicate or resample draws from its
//! own ChaCha stream keyed by `(seed, stream)`, so results do not depend on
//! how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Packs two indices into a stream id.
pub fn stream_id(major: u64, minor: u64) -> u64 {
    (major << 32) ^ minor
}

/// Uniform on the open interval (0,1), safe to feed to inverse cdfs.
pub fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` by widening multiply.
pub fn index_below(rng: &mut impl RngCore, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}
