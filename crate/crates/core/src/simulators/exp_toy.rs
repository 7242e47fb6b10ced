use super::{Simulator, SimulatorSpec, Transform};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Mean of `draws` exponential variates with rate `theta`.
#[derive(Debug, Clone)]
pub struct ExpToy {
    draws: usize,
    spec: SimulatorSpec,
}

impl ExpToy {
    pub fn new(draws: usize) -> Result<Self> {
        if draws == 0 {
            return Err(Error::config("exp-toy needs at least one draw"));
        }
        Ok(ExpToy {
            draws,
            spec: SimulatorSpec {
                param_names: vec!["theta".into()],
                stat_names: vec!["mean".into()],
                transforms: vec![Transform::Log],
            },
        })
    }

    pub fn draws(&self) -> usize {
        self.draws
    }
}

fn mean_of_exponentials(rate: f64, n: usize, rng: &mut RngStream) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::SimulatorDomain(format!(
            "exponential rate must be positive and finite, got {rate}"
        )));
    }
    let sum: f64 = (0..n).map(|_| rng.standard_exponential()).sum();
    let y = sum / (n as f64 * rate);
    if !y.is_finite() {
        return Err(Error::SimulationFailure(format!("rate {rate} produced {y}")));
    }
    Ok(y)
}

impl Simulator for ExpToy {
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn simulate(&self, params: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(vec![mean_of_exponentials(params[0], self.draws, rng)?])
    }
}

/// Observed statistic for the exponential example: the mean of `n` draws at
/// the true rate `theta_star`.
pub fn exponential_toy_observe(rng: &mut RngStream, theta_star: f64, n: usize) -> Result<Vec<f64>> {
    if !(theta_star > 0.0) {
        return Err(Error::invalid(format!("theta_star must be > 0, got {theta_star}")));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    Ok(vec![mean_of_exponentials(theta_star, n, rng)?])
}
