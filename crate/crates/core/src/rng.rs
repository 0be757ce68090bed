//! Seeded random streams.
//!
//! Every run derives independent ChaCha8 streams from one 64-bit seed, one
//! stream per purpose (environment, outcome sampling, each policy, ...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Well-known stream identifiers.
pub mod purpose {
    pub const ENVIRONMENT: u64 = 1;
    pub const OUTCOMES: u64 = 2;
    pub const COVERAGE: u64 = 3;
    /// Hidden parameters drawn when a config leaves them unspecified.
    pub const PARAMETERS: u64 = 4;
    /// Policies use `POLICY_BASE + policy_index`.
    pub const POLICY_BASE: u64 = 1 << 16;
    /// Per-policy outcome walks in the dependent model.
    pub const WALK_BASE: u64 = 1 << 32;
}

/// Independent stream for `(seed, purpose)`.
pub fn stream(seed: u64, purpose: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// Standard normal draw via the polar Box-Muller method.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * libm::sqrt(-2.0 * libm::log(s) / s);
        }
    }
}

/// Uniform draw from the closed unit ball in `dim` dimensions.
pub fn unit_ball<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> alloc::vec::Vec<f64> {
    loop {
        let g: alloc::vec::Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let n = crate::math::norm(&g);
        if n > 1e-12 {
            let radius = libm::pow(rng.random::<f64>(), 1.0 / dim as f64);
            return g.into_iter().map(|x| x / n * radius).collect();
        }
    }
}
