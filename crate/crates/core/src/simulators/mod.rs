//! Simulator interface, call accounting and the registry of built-in models.

mod blowfly;
mod counter;
mod exp_toy;
mod flat;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use blowfly::{
    blowfly_series, blowfly_stats, Blowfly, BlowflyConfig, BlowflyParams, PeakConfig,
};
pub use counter::{CallCounter, CountedSimulator};
pub use exp_toy::{exponential_toy_observe, ExpToy};
pub use flat::FlatNoise;

/// Map from sampler coordinates to simulator coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Log,
}

impl Transform {
    pub fn to_simulator(self, s: f64) -> f64 {
        match self {
            Transform::Identity => s,
            Transform::Log => s.exp(),
        }
    }

    pub fn to_sampling(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Log => v.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSpec {
    pub param_names: Vec<String>,
    pub stat_names: Vec<String>,
    pub transforms: Vec<Transform>,
}

impl SimulatorSpec {
    pub fn param_dim(&self) -> usize {
        self.param_names.len()
    }

    pub fn stat_dim(&self) -> usize {
        self.stat_names.len()
    }

    pub fn to_simulator_space(&self, sampling: &[f64]) -> Vec<f64> {
        sampling
            .iter()
            .zip(&self.transforms)
            .map(|(&s, t)| t.to_simulator(s))
            .collect()
    }

    pub fn to_sampling_space(&self, params: &[f64]) -> Vec<f64> {
        params
            .iter()
            .zip(&self.transforms)
            .map(|(&v, t)| t.to_sampling(v))
            .collect()
    }
}

/// A stochastic forward model producing summary statistics.
///
/// `params` are in simulator space; implementations draw all randomness from
/// the supplied stream and nothing else.
pub trait Simulator: Send + Sync {
    fn spec(&self) -> &SimulatorSpec;

    fn simulate(&self, params: &[f64], rng: &mut RngStream) -> Result<Vec<f64>>;
}

fn default_exp_draws() -> usize {
    500
}

fn default_noise_std() -> f64 {
    0.01
}

fn default_flat_dim() -> usize {
    1
}

/// Registry entry: a simulator name plus its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SimulatorConfig {
    ExpToy {
        #[serde(default = "default_exp_draws")]
        draws: usize,
    },
    Blowfly(#[serde(default)] BlowflyConfig),
    FlatNoise {
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default = "default_flat_dim")]
        dim: usize,
    },
}

pub const REGISTRY: &[&str] = &["exp-toy", "blowfly", "flat-noise"];

impl SimulatorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SimulatorConfig::ExpToy { .. } => "exp-toy",
            SimulatorConfig::Blowfly(_) => "blowfly",
            SimulatorConfig::FlatNoise { .. } => "flat-noise",
        }
    }

    /// Registry lookup with default options.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exp-toy" => Ok(SimulatorConfig::ExpToy {
                draws: default_exp_draws(),
            }),
            "blowfly" => Ok(SimulatorConfig::Blowfly(BlowflyConfig::default())),
            "flat-noise" => Ok(SimulatorConfig::FlatNoise {
                noise_std: default_noise_std(),
                dim: default_flat_dim(),
            }),
            other => Err(Error::config(format!(
                "unknown simulator '{other}', expected one of {REGISTRY:?}"
            ))),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Simulator>> {
        Ok(match self {
            SimulatorConfig::ExpToy { draws } => Box::new(ExpToy::new(*draws)?),
            SimulatorConfig::Blowfly(cfg) => Box::new(Blowfly::new(cfg.clone())?),
            SimulatorConfig::FlatNoise { noise_std, dim } => {
                Box::new(FlatNoise::new(*noise_std, *dim)?)
            }
        })
    }
}

/// Check a simulator output for length and finiteness.
pub(crate) fn check_output(spec: &SimulatorSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.stat_dim() {
        return Err(Error::SimulationFailure(format!(
            "expected {} statistics, got {}",
            spec.stat_dim(),
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !v.is_finite()) {
        return Err(Error::SimulationFailure(format!(
            "non-finite statistic {v}"
        )));
    }
    Ok(())
}
