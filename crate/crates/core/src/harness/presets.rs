//! Ready-made configurations for the two benchmark problems.

use crate::samplers::{GpSettings, PriorComponent, ProposalKind, ProposalSpec, RunConfig, SamplerKind};
use crate::simulators::{BlowflyConfig, BlowflyParams, SimulatorConfig};

/// `Gamma(alpha, beta)` prior on the exponential rate.
pub const EXP_PRIOR_SHAPE: f64 = 0.1;
pub const EXP_PRIOR_RATE: f64 = 0.1;
pub const EXP_DRAWS: usize = 500;
pub const EXP_THETA_STAR: f64 = 0.1;

/// Exponential toy: log-space random walk with step 0.1 from theta = 1.
/// Kernel samplers need `epsilon > 0`, set by the caller.
pub fn exp_toy_config(sampler: SamplerKind, s0: usize, xi: f64, seed: u64) -> RunConfig {
    RunConfig {
        sampler,
        simulator: SimulatorConfig::ExpToy { draws: EXP_DRAWS },
        prior: vec![PriorComponent::Gamma {
            shape: EXP_PRIOR_SHAPE,
            rate: EXP_PRIOR_RATE,
        }],
        proposal: ProposalSpec {
            kind: ProposalKind::FullGaussian,
            stds: vec![0.1],
        },
        init: vec![1.0],
        s0,
        delta_s: 10,
        epsilon: 0.0,
        xi,
        m: crate::accept::DEFAULT_ENSEMBLE_SIZE,
        grid: crate::accept::DEFAULT_GRID_SIZE,
        chain_length: 10_000,
        burn_in: 1_500,
        seed,
        diagonal: false,
        max_sims_per_step: 10_000,
        max_acquisitions: 50,
        gp: GpSettings::default(),
    }
}

/// Normal priors on (log P, log delta, log N0, log sigma_d, log sigma_p, log tau).
pub const BLOWFLY_PRIOR: [(f64, f64); 6] = [
    (2.0, 2.0),
    (-1.8, 0.4),
    (6.0, 0.5),
    (-0.75, 1.0),
    (-0.5, 1.0),
    (2.7, 0.1),
];

pub fn blowfly_prior() -> Vec<PriorComponent> {
    BLOWFLY_PRIOR
        .iter()
        .map(|&(mean, std)| PriorComponent::Normal { mean, std })
        .collect()
}

/// Blowfly: single-coordinate proposals at a fifth of the prior scale,
/// starting from the prior means.
pub fn blowfly_config(sampler: SamplerKind, s0: usize, xi: f64, seed: u64, diagonal: bool) -> RunConfig {
    RunConfig {
        sampler,
        simulator: SimulatorConfig::Blowfly(BlowflyConfig::default()),
        prior: blowfly_prior(),
        proposal: ProposalSpec {
            kind: ProposalKind::SingleCoordinate,
            stds: BLOWFLY_PRIOR.iter().map(|p| p.1 / 5.0).collect(),
        },
        init: BlowflyParams::prior_means().to_vec(),
        s0,
        delta_s: 10,
        epsilon: 0.0,
        xi,
        m: crate::accept::DEFAULT_ENSEMBLE_SIZE,
        grid: crate::accept::DEFAULT_GRID_SIZE,
        chain_length: 5_000,
        burn_in: 1_000,
        seed,
        diagonal,
        max_sims_per_step: 10_000,
        max_acquisitions: 50,
        gp: GpSettings::default(),
    }
}
