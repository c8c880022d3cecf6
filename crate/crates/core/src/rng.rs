//! Seeded random streams.
//!
//! Every world owns one ChaCha8 generator per subsystem, all keyed by the world
//! seed and separated by ChaCha stream id. ChaCha8 output is specified
//! independently of platform and word size, so fixtures are portable, and
//! draws in one subsystem never shift another subsystem's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named stream ids. Changing a value changes every fixture that uses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    DeliveryLatency = 1,
    Guessing = 2,
    SecurityCodes = 3,
    Tokens = 4,
}

/// Builds the generator for one stream of a seed.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct RngStreams {
    seed: u64,
    pub latency: ChaCha8Rng,
    pub guessing: ChaCha8Rng,
    pub codes: ChaCha8Rng,
    pub tokens: ChaCha8Rng,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams {
            seed,
            latency: stream_rng(seed, Stream::DeliveryLatency),
            guessing: stream_rng(seed, Stream::Guessing),
            codes: stream_rng(seed, Stream::SecurityCodes),
            tokens: stream_rng(seed, Stream::Tokens),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}
