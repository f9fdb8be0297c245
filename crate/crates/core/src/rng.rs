//! Counter-keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! run seed and selected by a 64-bit stream id. The stream id packs the purpose,
//! iteration and particle index, so each particle gets its own stream at every
//! iteration and the draws never depend on which thread evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest iteration index representable in a stream id.
pub const MAX_ITERATION: u64 = (1 << 24) - 1;
/// Largest particle index representable in a stream id.
pub const MAX_PARTICLE: u64 = u32::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamPurpose {
    Init = 1,
    Langevin = 2,
    Normalizer = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream for one particle at one iteration.
    ///
    /// Layout of the id: `purpose` in bits 56..64, `iteration` in bits 32..56 and
    /// `particle` in bits 0..32. Distinct triples give distinct streams.
    pub fn keyed(seed: u64, purpose: StreamPurpose, iteration: usize, particle: usize) -> Self {
        let iteration = iteration as u64;
        let particle = particle as u64;
        debug_assert!(iteration <= MAX_ITERATION, "iteration {iteration} overflows stream id");
        debug_assert!(particle <= MAX_PARTICLE, "particle {particle} overflows stream id");
        let stream_id = ((purpose as u64) << 56) | ((iteration & MAX_ITERATION) << 32) | (particle & MAX_PARTICLE);
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}
