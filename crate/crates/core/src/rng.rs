//! Seedable random streams and scalar variate generation.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit seed and selected by
//! a 64-bit stream id. Distinct stream ids under one seed address disjoint
//! keystreams, so simulator batches can be scattered across workers and still
//! reproduce bit-for-bit.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Stream id reserved for the Metropolis-Hastings decisions of a chain.
pub const CHAIN_STREAM: u64 = 0;
/// Stream id used for prior draws that seed a surrogate.
pub const INIT_STREAM: u64 = 1;
/// Stream id used when synthesising observations.
pub const OBSERVE_STREAM: u64 = 2;
/// Stream id for posterior-predictive simulation.
pub const PREDICTIVE_STREAM: u64 = 3;
/// Simulator call `k` of a run draws from stream `SIM_STREAM_BASE + k`.
pub const SIM_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        RngStream {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Fresh stream under the same seed.
    pub fn sibling(&self, stream: u64) -> Self {
        RngStream::new(self.seed, stream)
    }

    /// Uniform variate on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn standard_exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> Result<f64> {
        normal_draw(self, mean, std)
    }

    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        gamma_draw(self, shape, rate)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// `mean + std * z` with `z` standard normal. `std == 0` returns `mean` exactly.
pub fn normal_draw(rng: &mut RngStream, mean: f64, std: f64) -> Result<f64> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::invalid(format!("normal std must be >= 0, got {std}")));
    }
    if std == 0.0 {
        return Ok(mean);
    }
    Ok(mean + std * rng.standard_normal())
}

/// Gamma variate parameterised by shape and rate (mean `shape / rate`).
/// Shapes below one are supported.
pub fn gamma_draw(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
        return Err(Error::invalid(format!(
            "gamma requires shape > 0 and rate > 0, got shape={shape} rate={rate}"
        )));
    }
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::invalid(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(dist.sample(&mut rng.inner))
}
