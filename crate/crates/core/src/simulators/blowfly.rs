//! Delayed population dynamics with demographic and environmental noise.
//!
//! `N[t+1] = P N[t-L] exp(-N[t-L] / N0) e[t] + N[t] exp(-delta eps[t])`, with
//! `e ~ Gamma(1/sigma_p^2, 1/sigma_p^2)` and `eps ~ Gamma(1/sigma_d^2, 1/sigma_d^2)`
//! (both unit mean) and integer lag `L = max(1, round(tau))`.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{Simulator, SimulatorSpec, Transform};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Noise scales below this are treated as deterministic (unit noise).
pub const DETERMINISTIC_SIGMA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowflyParams {
    pub p: f64,
    pub delta: f64,
    pub n0: f64,
    pub sigma_d: f64,
    pub sigma_p: f64,
    pub tau: f64,
}

impl BlowflyParams {
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 6 {
            return Err(Error::invalid(format!("blowfly takes 6 parameters, got {}", v.len())));
        }
        Ok(BlowflyParams {
            p: v[0],
            delta: v[1],
            n0: v[2],
            sigma_d: v[3],
            sigma_p: v[4],
            tau: v[5],
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.p, self.delta, self.n0, self.sigma_d, self.sigma_p, self.tau]
    }

    /// exp of the prior means of the log parameters.
    pub fn prior_means() -> Self {
        BlowflyParams {
            p: 2.0f64.exp(),
            delta: (-1.8f64).exp(),
            n0: 6.0f64.exp(),
            sigma_d: (-0.75f64).exp(),
            sigma_p: (-0.5f64).exp(),
            tau: 2.7f64.exp(),
        }
    }

    pub fn lag(&self) -> usize {
        (self.tau.round() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        let all = self.to_vec();
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::SimulatorDomain(format!(
                "blowfly parameters must be finite and non-negative: {all:?}"
            )));
        }
        if self.n0 <= 0.0 || self.tau <= 0.0 {
            return Err(Error::SimulatorDomain(format!(
                "blowfly N0 and tau must be positive: N0={} tau={}",
                self.n0, self.tau
            )));
        }
        Ok(())
    }
}

/// Smooth peak detector settings: a local maximum at height `n` scores
/// `1 / (1 + exp(-sharpness * (n - threshold * mean) / mean))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakConfig {
    pub threshold: f64,
    pub sharpness: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            threshold: 1.5,
            sharpness: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowflyConfig {
    pub t: usize,
    pub burn_in: usize,
    pub initial: f64,
    pub peaks: PeakConfig,
}

impl Default for BlowflyConfig {
    fn default() -> Self {
        BlowflyConfig {
            t: 1000,
            burn_in: 500,
            initial: 180.0,
            peaks: PeakConfig::default(),
        }
    }
}

/// Unit-mean gamma noise, or the constant 1 in the deterministic limit.
enum Noise {
    Constant,
    Gamma(Gamma<f64>),
}

impl Noise {
    fn new(sigma: f64) -> Result<Self> {
        if sigma < DETERMINISTIC_SIGMA {
            return Ok(Noise::Constant);
        }
        let shape = 1.0 / (sigma * sigma);
        Gamma::new(shape, 1.0 / shape)
            .map(Noise::Gamma)
            .map_err(|e| Error::SimulatorDomain(format!("noise scale {sigma}: {e}")))
    }

    fn draw(&self, rng: &mut RngStream) -> f64 {
        match self {
            Noise::Constant => 1.0,
            Noise::Gamma(g) => g.sample(rng),
        }
    }
}

/// Simulate `burn_in + t` values and return the last `t`.
pub fn blowfly_series(
    p: &BlowflyParams,
    cfg: &BlowflyConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    p.validate()?;
    if cfg.t == 0 {
        return Err(Error::invalid("series length must be >= 1"));
    }
    if !(cfg.initial > 0.0) {
        return Err(Error::invalid("initial population must be positive"));
    }
    let lag = p.lag();
    let total = cfg.t + cfg.burn_in;
    if lag >= total {
        return Err(Error::SimulatorDomain(format!(
            "lag {lag} must be shorter than the simulated length {total}"
        )));
    }
    let repro = Noise::new(p.sigma_p)?;
    let survival = Noise::new(p.sigma_d)?;
    let mut n = Vec::with_capacity(total);
    n.resize(lag + 1, cfg.initial);
    while n.len() < total {
        let t = n.len() - 1;
        let lagged = n[t - lag];
        let e = repro.draw(rng);
        let eps = survival.draw(rng);
        let next = p.p * lagged * (-lagged / p.n0).exp() * e + n[t] * (-p.delta * eps).exp();
        if !next.is_finite() {
            return Err(Error::SimulationFailure(format!(
                "population overflowed at step {t}"
            )));
        }
        n.push(next);
    }
    Ok(n.split_off(total - cfg.t))
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `[mean, mean - median, smooth peak score, ln(max + 1)]`.
pub fn blowfly_stats(series: &[f64], peaks: &PeakConfig) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let med = median(series);
    let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut peak_score = 0.0;
    if mean > 0.0 {
        let cut = peaks.threshold * mean;
        for w in series.windows(3) {
            if w[0] < w[1] && w[1] >= w[2] {
                let z = peaks.sharpness * (w[1] - cut) / mean;
                peak_score += 1.0 / (1.0 + (-z).exp());
            }
        }
    }
    Ok(vec![mean, mean - med, peak_score, (max + 1.0).ln()])
}

pub struct Blowfly {
    cfg: BlowflyConfig,
    spec: SimulatorSpec,
}

impl Blowfly {
    pub fn new(cfg: BlowflyConfig) -> Result<Self> {
        if cfg.t == 0 {
            return Err(Error::config("blowfly t must be >= 1"));
        }
        Ok(Blowfly {
            cfg,
            spec: SimulatorSpec {
                param_names: ["P", "delta", "N0", "sigma_d", "sigma_p", "tau"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                stat_names: ["mean", "mean_minus_median", "smooth_peaks", "log_max"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                transforms: vec![Transform::Log; 6],
            },
        })
    }

    pub fn config(&self) -> &BlowflyConfig {
        &self.cfg
    }

    pub fn series(&self, params: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        blowfly_series(&BlowflyParams::from_slice(params)?, &self.cfg, rng)
    }
}

impl Simulator for Blowfly {
    fn spec(&self) -> &SimulatorSpec {
        &self.spec
    }

    fn simulate(&self, params: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        let series = self.series(params, rng)?;
        blowfly_stats(&series, &self.cfg.peaks)
    }
}
