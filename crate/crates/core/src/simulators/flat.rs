use super::{Simulator, SimulatorSpec, Transform};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A statistic that ignores the parameters: a single Gaussian noise draw.
/// Any ABC posterior built on it should equal the prior.
#[derive(Debug, Clone)]
pub struct FlatNoise {
    noise_std: f64,
    spec: SimulatorSpec,
}

impl FlatNoise {
    pub fn new(noise_std: f64, dim: usize) -> Result<Self> {
        if !(noise_std >= 0.0) || dim == 0 {
            return Err(Error::config("flat-noise needs noise_std >= 0 and dim >= 1"));
        }
        Ok(FlatNoise {
            noise_std,
            spec: SimulatorSpec {
                param_names: (1..=dim).map(|i| format!("theta_{i}")).collect(),
                stat_names: vec!["noise".into()],
                transforms: vec![Transform::Identity; dim],
            },
        })
    }
}

impl Simulator for FlatNoise {
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn simulate(&self, _params: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(vec![rng.normal(0.0, self.noise_std)?])
    }
}
