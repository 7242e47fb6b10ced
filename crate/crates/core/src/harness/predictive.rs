use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::{RngStream, PREDICTIVE_STREAM};
use crate::simulators::{Blowfly, BlowflyConfig, CountedSimulator, SimulatorConfig};

/// Every `k`-th element, starting with the first.
pub fn thin<T: Clone>(v: &[T], k: usize) -> Vec<T> {
    v.iter().step_by(k.max(1)).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveOutput {
    pub stats: Vec<Vec<f64>>,
    pub failures: usize,
}

fn predictive_seed(seed: u64) -> u64 {
    RngStream::new(seed, PREDICTIVE_STREAM).next_u64()
}

/// Monte-Carlo posterior predictive: `draws` simulations at each retained
/// sample (simulator units). Failed simulations are skipped and counted.
pub fn posterior_predictive(
    samples: &[Vec<f64>],
    sim: &SimulatorConfig,
    draws: usize,
    thin_every: usize,
    seed: u64,
) -> Result<PredictiveOutput> {
    if samples.is_empty() || draws == 0 {
        return Err(Error::invalid("posterior predictive needs samples and draws >= 1"));
    }
    let counted = CountedSimulator::new(sim.build()?, predictive_seed(seed));
    let spec = counted.spec().clone();
    let mut out = PredictiveOutput {
        stats: Vec::new(),
        failures: 0,
    };
    for theta in thin(samples, thin_every) {
        if theta.len() != spec.param_dim() {
            return Err(Error::invalid("sample dimension does not match the simulator"));
        }
        for r in counted.simulate_batch(&spec.to_sampling_space(&theta), draws) {
            match r {
                Ok(x) => out.stats.push(x),
                Err(e) if e.is_simulation_error() => {
                    log::warn!("predictive simulation failed: {e}");
                    out.failures += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Blowfly population series simulated at retained posterior samples.
pub fn predictive_series(
    samples: &[Vec<f64>],
    cfg: &BlowflyConfig,
    thin_every: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let sim = Blowfly::new(cfg.clone())?;
    let base = predictive_seed(seed);
    thin(samples, thin_every)
        .iter()
        .enumerate()
        .map(|(i, theta)| {
            let mut rng = RngStream::new(base, crate::rng::SIM_STREAM_BASE + i as u64);
            sim.series(theta, &mut rng)
        })
        .collect()
}
