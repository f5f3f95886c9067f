//! Counter-based random streams.
//!
//! Every random draw in the collision and eraser simulations is addressed by
//! `(master seed, stream, position)`. The backing generator is ChaCha8, whose
//! keystream is a pure function of key, stream id and word position, so a
//! realization can be re-created from its coordinates alone regardless of how
//! work was scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32-bit words consumed by one Gaussian draw (two u64 for Box–Muller).
const WORDS_PER_NORMAL: u128 = 4;

/// SplitMix64 finaliser. Used to derive independent sub-keys from a master
/// seed and a small integer tag.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for a family of streams: `derive_key(seed, tag)` gives unrelated keys
/// for different tags (e.g. grid points of a sweep).
pub fn derive_key(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// A positioned stream of standard normal variates. Draw `n` of stream
/// `(key, stream)` is always the same number: it consumes keystream words
/// `[4n, 4n + 4)`.
#[derive(Clone, Debug)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(key: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Positions the stream so that the next draw is draw number `index`.
    pub fn at(key: u64, stream: u64, index: u64) -> Self {
        let mut s = Self::new(key, stream);
        s.seek(index);
        s
    }

    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(index as u128 * WORDS_PER_NORMAL);
    }

    /// Index of the next draw.
    pub fn position(&self) -> u64 {
        (self.rng.get_word_pos() / WORDS_PER_NORMAL) as u64
    }

    /// Box–Muller, cosine branch only, so each draw has a fixed cost.
    pub fn next_normal(&mut self) -> f64 {
        let a = self.rng.next_u64();
        let b = self.rng.next_u64();
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
