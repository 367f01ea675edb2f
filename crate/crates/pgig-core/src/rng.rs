//! Deterministic pseudorandom source: splitmix64 core with Box-Muller
//! gaussians.
//!
//! The generator is fully specified so streams reproduce bit-identically on
//! every platform: the state advances by the splitmix64 increment
//! 0x9E3779B97F4A7C15 and is finalized with the standard two-multiply mix.
//! Uniform doubles take the top 53 bits of each output word. Each gaussian
//! draw consumes exactly two uniforms and uses the cosine branch of the
//! Box-Muller transform.
//!
//! A `RandomSource` is single-owner mutable state; callers that need
//! independent streams derive child sources with [`RandomSource::derive`]
//! instead of sharing one.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    state: u64,
}

const INCREMENT: u64 = 0x9E3779B97F4A7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl RandomSource {
    /// Name of the underlying generator.
    pub const ALGORITHM: &'static str = "splitmix64";

    pub fn new(seed: u64) -> Self {
        RandomSource { seed, state: seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    /// Derives an independent child source; `stream` selects the child.
    /// Children of the same (seed, stream) pair are identical.
    pub fn derive(&self, stream: u64) -> RandomSource {
        let child_seed = mix(self
            .seed
            .wrapping_add(stream.wrapping_add(1).wrapping_mul(INCREMENT)));
        RandomSource::new(child_seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(INCREMENT);
        mix(self.state)
    }

    /// Uniform double in [0, 1): top 53 bits scaled by 2^-53.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform double in (0, 1], used where a logarithm follows.
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One N(mu, sigma^2) draw via Box-Muller (cosine branch).
    pub fn gaussian(&mut self, mu: f64, sigma: f64) -> f64 {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        mu + sigma * z
    }

    /// Uniform index in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `n` independent N(mu, sigma^2) draws as a rank-1 tensor.
pub fn gaussian_vector(
    source: &mut RandomSource,
    mu: f64,
    sigma: f64,
    n: usize,
) -> Result<Tensor> {
    if sigma < 0.0 {
        return Err(Error::Argument(format!(
            "gaussian sigma must be >= 0, got {sigma}"
        )));
    }
    if n == 0 {
        return Err(Error::Argument("gaussian draw count must be >= 1".into()));
    }
    let data: Vec<f64> = (0..n).map(|_| source.gaussian(mu, sigma)).collect();
    Tensor::vector(data)
}
