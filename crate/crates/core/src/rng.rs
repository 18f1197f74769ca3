//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream identified by a
//! `(seed, stream)` pair. Work item `k` of a Monte Carlo run always uses stream
//! `k`, so results do not depend on how items are scheduled across workers.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

pub use rand_chacha::ChaCha8Rng as Stream;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = Stream::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Complex standard normal with unit total variance, `(a + ib) / sqrt(2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
