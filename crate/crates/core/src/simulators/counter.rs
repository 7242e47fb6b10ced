use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;

use super::{check_output, Simulator, SimulatorSpec};
use crate::error::Result;
use crate::rng::{RngStream, SIM_STREAM_BASE};

/// Simulation call accounting.
///
/// `total` counts every simulator invocation; `per_step` holds one entry per
/// finished MH step. Calls made outside any step (e.g. surrogate
/// initialisation) are the difference between the two.
#[derive(Debug, Default)]
pub struct CallCounter {
    total: AtomicU64,
    step_start: AtomicU64,
    per_step: Mutex<Vec<u64>>,
}

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> u64 {
        self.total.load(Ordering::SeqCst)
    }

    /// Reserve `n` consecutive call indices.
    fn reserve(&self, n: u64) -> u64 {
        self.total.fetch_add(n, Ordering::SeqCst)
    }

    pub fn begin_step(&self) {
        self.step_start.store(self.total(), Ordering::SeqCst);
    }

    /// Close the current step and return its call count.
    pub fn end_step(&self) -> u64 {
        let calls = self.total() - self.step_start.load(Ordering::SeqCst);
        self.per_step.lock().unwrap().push(calls);
        self.step_start.store(self.total(), Ordering::SeqCst);
        calls
    }

    pub fn per_step(&self) -> Vec<u64> {
        self.per_step.lock().unwrap().clone()
    }

    /// Calls not attributed to any step.
    pub fn unattributed(&self) -> u64 {
        self.total() - self.per_step.lock().unwrap().iter().sum::<u64>()
    }
}

/// A simulator bound to a seed and a call counter.
///
/// Call `k` of the run draws from substream `SIM_STREAM_BASE + k`, so results
/// do not depend on whether a batch runs serially or on a thread pool.
pub struct CountedSimulator {
    inner: Box<dyn Simulator>,
    seed: u64,
    counter: CallCounter,
    parallel_threshold: usize,
}

impl CountedSimulator {
    pub fn new(inner: Box<dyn Simulator>, seed: u64) -> Self {
        CountedSimulator {
            inner,
            seed,
            counter: CallCounter::new(),
            parallel_threshold: 32,
        }
    }

    /// Batches of at least `n` calls run on the rayon pool.
    pub fn with_parallel_threshold(mut self, n: usize) -> Self {
        self.parallel_threshold = n.max(1);
        self
    }

    pub fn spec(&self) -> &SimulatorSpec {
        self.inner.spec()
    }

    pub fn counter(&self) -> &CallCounter {
        &self.counter
    }

    pub fn inner(&self) -> &dyn Simulator {
        self.inner.as_ref()
    }

    fn run_one(&self, params: &[f64], index: u64) -> Result<Vec<f64>> {
        let mut rng = RngStream::new(self.seed, SIM_STREAM_BASE + index);
        let x = self.inner.simulate(params, &mut rng)?;
        check_output(self.inner.spec(), &x)?;
        Ok(x)
    }

    /// One simulation at a sampling-space point.
    pub fn simulate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let params = self.spec().to_simulator_space(theta);
        let index = self.counter.reserve(1);
        self.run_one(&params, index)
    }

    /// `n` simulations at one sampling-space point, in call order.
    pub fn simulate_batch(&self, theta: &[f64], n: usize) -> Vec<Result<Vec<f64>>> {
        let params = self.spec().to_simulator_space(theta);
        let base = self.counter.reserve(n as u64);
        if n >= self.parallel_threshold {
            (0..n as u64)
                .into_par_iter()
                .map(|i| self.run_one(&params, base + i))
                .collect()
        } else {
            (0..n as u64).map(|i| self.run_one(&params, base + i)).collect()
        }
    }
}
