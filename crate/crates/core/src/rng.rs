//! Seeded random streams.
//!
//! All randomness flows through ChaCha8, a counter-based generator. A run is
//! keyed by a 64-bit seed and each consumer draws from its own stream id, so
//! adding draws in one place never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha8Rng;

/// Stream ids reserved by the generators in this crate.
pub mod stream {
    pub const ACCOUNTS: u64 = 1;
    pub const REPS: u64 = 2;
    pub const TREATMENT: u64 = 3;
    pub const OUTCOME_NOISE: u64 = 4;
    pub const ENGAGEMENT: u64 = 5;
    pub const BANDIT_ENV: u64 = 6;
    pub const BANDIT_POLICY: u64 = 7;
    pub const NET_INIT: u64 = 8;
    pub const PANEL: u64 = 9;
    pub const REALIZED: u64 = 10;
    pub const IMPORTANCE: u64 = 11;
    pub const LAYOUT: u64 = 12;
    pub const BOOTSTRAP: u64 = 13;
    pub const SERVING: u64 = 14;
}

/// Generator for `(seed, stream)`.
pub fn seeded(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for a keyed sub-stream, e.g. one per account or per day.
pub fn keyed(seed: u64, stream: u64, key: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

#[inline]
pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    uniform(rng) < p
}
