use serde::{Deserialize, Serialize};

use crate::dist::LN_2PI;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::simulators::{SimulatorConfig, SimulatorSpec, Transform};

/// One independent prior factor over a sampling-space coordinate `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorComponent {
    /// `s ~ N(mean, std^2)`.
    Normal { mean: f64, std: f64 },
    /// `exp(s) ~ Gamma(shape, rate)`; the density over `s` carries the
    /// `exp(s)` Jacobian. Only valid for log-transformed coordinates.
    Gamma { shape: f64, rate: f64 },
}

impl PriorComponent {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PriorComponent::Normal { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            PriorComponent::Gamma { shape, rate } => {
                shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid prior component {self:?}")))
        }
    }

    pub fn log_density(&self, s: f64) -> f64 {
        match *self {
            PriorComponent::Normal { mean, std } => {
                let z = (s - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * LN_2PI
            }
            PriorComponent::Gamma { shape, rate } => {
                shape * rate.ln() - statrs::function::gamma::ln_gamma(shape) + shape * s - rate * s.exp()
            }
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            PriorComponent::Normal { mean, std } => mean + std * rng.standard_normal(),
            PriorComponent::Gamma { shape, rate } => {
                // Validated parameters; the draw can only fail on bad input.
                let g = rng.gamma(shape, rate).expect("validated gamma prior");
                g.max(f64::MIN_POSITIVE).ln()
            }
        }
    }
}

/// Product prior over the sampling space.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    components: Vec<PriorComponent>,
}

impl Prior {
    pub fn new(components: Vec<PriorComponent>, spec: &SimulatorSpec) -> Result<Self> {
        if components.len() != spec.param_dim() {
            return Err(Error::config(format!(
                "prior has {} components, simulator has {} parameters",
                components.len(),
                spec.param_dim()
            )));
        }
        for (c, t) in components.iter().zip(&spec.transforms) {
            c.validate()?;
            if matches!(c, PriorComponent::Gamma { .. }) && *t != Transform::Log {
                return Err(Error::config("gamma prior needs a log-transformed parameter"));
            }
        }
        Ok(Prior { components })
    }

    pub fn components(&self) -> &[PriorComponent] {
        &self.components
    }

    pub fn log_density(&self, s: &[f64]) -> f64 {
        self.components.iter().zip(s).map(|(c, v)| c.log_density(*v)).sum()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.components.iter().map(|c| c.sample(rng)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    FullGaussian,
    SingleCoordinate,
}

/// Symmetric Gaussian random walk in sampling space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalSpec {
    pub kind: ProposalKind,
    pub stds: Vec<f64>,
}

impl ProposalSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.stds.len() != dim {
            return Err(Error::config(format!(
                "proposal has {} scales, expected {dim}",
                self.stds.len()
            )));
        }
        if self.stds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::config("proposal scales must be positive"));
        }
        Ok(())
    }

    pub fn propose(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let mut out = theta.to_vec();
        match self.kind {
            ProposalKind::FullGaussian => {
                for (v, s) in out.iter_mut().zip(&self.stds) {
                    *v += s * rng.standard_normal();
                }
            }
            ProposalKind::SingleCoordinate => {
                let d = rng.index(out.len());
                out[d] += self.stds[d] * rng.standard_normal();
            }
        }
        out
    }

    /// `log q(theta | theta') - log q(theta' | theta)`; zero for both kinds.
    pub fn log_ratio(&self, _theta: &[f64], _theta_prime: &[f64]) -> f64 {
        0.0
    }

    /// Log density of the move `from -> to`, for symmetry checks.
    pub fn log_density(&self, from: &[f64], to: &[f64]) -> f64 {
        let z = |d: usize| {
            let s = self.stds[d];
            let r = (to[d] - from[d]) / s;
            -0.5 * r * r - s.ln() - 0.5 * LN_2PI
        };
        match self.kind {
            ProposalKind::FullGaussian => (0..from.len()).map(z).sum(),
            ProposalKind::SingleCoordinate => {
                let moved: Vec<usize> = (0..from.len()).filter(|d| from[*d] != to[*d]).collect();
                match moved.as_slice() {
                    [d] => z(*d) - (from.len() as f64).ln(),
                    [] => f64::NAN,
                    _ => f64::NEG_INFINITY,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    KernelMarginal,
    KernelPseudoMarginal,
    Asl,
    Gps,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::KernelMarginal => "kernel-marginal",
            SamplerKind::KernelPseudoMarginal => "kernel-pseudo-marginal",
            SamplerKind::Asl => "asl",
            SamplerKind::Gps => "gps",
        }
    }
}

fn default_delta_s() -> usize {
    10
}
fn default_m() -> usize {
    crate::accept::DEFAULT_ENSEMBLE_SIZE
}
fn default_grid() -> usize {
    crate::accept::DEFAULT_GRID_SIZE
}
fn default_max_sims() -> usize {
    10_000
}
fn default_max_acq() -> usize {
    50
}

/// Surrogate settings for the GPS sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    /// Gradient steps per hyperparameter fit.
    pub fit_steps: usize,
    /// Fit after each of this many first insertions...
    pub fit_initial: usize,
    /// ...and after every `fit_every`-th insertion thereafter (0 = never).
    pub fit_every: usize,
    /// Most recent training points used when fitting.
    pub fit_max_points: usize,
    pub noise_floor_rel: f64,
    /// When false the surrogate is frozen after initialisation.
    pub acquire: bool,
    /// Per-statistic warp applied to simulator outputs and to the
    /// observation before they reach the GPs. Empty means identity.
    pub output_transform: Vec<Transform>,
}

impl Default for GpSettings {
    fn default() -> Self {
        GpSettings {
            fit_steps: 20,
            fit_initial: 50,
            fit_every: 10,
            fit_max_points: 256,
            noise_floor_rel: 1e-6,
            acquire: true,
            output_transform: Vec::new(),
        }
    }
}

impl GpSettings {
    /// Whether to refit after the `k`-th (1-based) insertion.
    pub fn fit_due(&self, k: usize) -> bool {
        k <= self.fit_initial || (self.fit_every > 0 && k % self.fit_every == 0)
    }
}

/// A fully resolved chain configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sampler: SamplerKind,
    pub simulator: SimulatorConfig,
    pub prior: Vec<PriorComponent>,
    pub proposal: ProposalSpec,
    /// Starting point in simulator (natural) units.
    pub init: Vec<f64>,
    /// `S` for kernel ABC, `S0` for ASL and GPS.
    pub s0: usize,
    #[serde(default = "default_delta_s")]
    pub delta_s: usize,
    #[serde(default)]
    pub epsilon: f64,
    /// Decision-error threshold in `(0, 0.5]`; exactly 1 selects fixed-S
    /// synthetic likelihood with no refinement.
    pub xi: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub chain_length: usize,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default)]
    pub diagonal: bool,
    /// ASL: cap on simulations per location within one step.
    #[serde(default = "default_max_sims")]
    pub max_sims_per_step: usize,
    /// GPS: cap on acquisitions within one step.
    #[serde(default = "default_max_acq")]
    pub max_acquisitions: usize,
    #[serde(default)]
    pub gp: GpSettings,
}

impl RunConfig {
    pub fn fixed_s(&self) -> bool {
        self.xi == 1.0
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.simulator.build()?.spec().clone();
        let d = spec.param_dim();
        Prior::new(self.prior.clone(), &spec)?;
        self.proposal.validate(d)?;
        if self.init.len() != d {
            return Err(Error::config(format!("init has {} values, expected {d}", self.init.len())));
        }
        let s = spec.to_sampling_space(&self.init);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("init is outside the parameter domain"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config("epsilon must be finite and >= 0"));
        }
        match self.sampler {
            SamplerKind::KernelMarginal | SamplerKind::KernelPseudoMarginal => {
                if self.epsilon <= 0.0 {
                    return Err(Error::config("kernel ABC needs epsilon > 0"));
                }
                if self.s0 < 1 {
                    return Err(Error::config("kernel ABC needs S >= 1"));
                }
            }
            SamplerKind::Asl => {
                if self.s0 < 2 {
                    return Err(Error::config("ASL needs S0 >= 2"));
                }
                if self.delta_s < 1 && !self.fixed_s() {
                    return Err(Error::config("ASL needs delta_s >= 1"));
                }
                if self.max_sims_per_step < self.s0 {
                    return Err(Error::config("max_sims_per_step must be at least S0"));
                }
            }
            SamplerKind::Gps => {
                if self.s0 < 2 {
                    return Err(Error::config("GPS needs S0 >= 2"));
                }
                if self.fixed_s() {
                    return Err(Error::config("xi = 1 (fixed S) applies to ASL only"));
                }
                if !(self.gp.noise_floor_rel >= 0.0) {
                    return Err(Error::config("gp.noise_floor_rel must be >= 0"));
                }
                let t = &self.gp.output_transform;
                if !t.is_empty() && t.len() != spec.stat_dim() {
                    return Err(Error::config(format!(
                        "gp.output_transform needs {} entries",
                        spec.stat_dim()
                    )));
                }
            }
        }
        if !(self.xi > 0.0 && self.xi <= 0.5) && !self.fixed_s() {
            return Err(Error::config(format!("xi must lie in (0, 0.5] or equal 1, got {}", self.xi)));
        }
        if self.m < 1 || self.grid < 2 {
            return Err(Error::config("need M >= 1 and grid >= 2"));
        }
        if self.chain_length <= self.burn_in {
            return Err(Error::config("chain_length must exceed burn_in"));
        }
        Ok(())
    }
}
