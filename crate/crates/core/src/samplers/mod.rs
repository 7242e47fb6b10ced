//! Metropolis-Hastings drivers: marginal and pseudo-marginal kernel ABC,
//! adaptive synthetic-likelihood ABC and GP-surrogate ABC.
//!
//! A [`Sampler`] owns one chain: its configuration, the counted simulator,
//! the observed statistics and (for GPS) the surrogate. Every random draw of
//! the chain itself comes from the chain stream; simulations draw from their
//! own per-call substreams.

mod config;
mod output;

use std::time::Instant;

use crate::accept::{alpha_from_parts, mh_decide, AcceptanceEnsemble, AcceptanceRatioParts, Decision};
use crate::dist::normal_logpdf;
use crate::error::{Error, Result};
use crate::gp::{acquire_from_predictives, sample_bivariate, Acquire, BivariatePredictive, FitOptions, SurrogateState};
use crate::rng::{RngStream, CHAIN_STREAM, INIT_STREAM};
use crate::simulators::{CountedSimulator, Transform};
use crate::synthetic::{estimate_moments, EpsilonKernel, MomentEstimate};

pub use config::{
    GpSettings, Prior, PriorComponent, ProposalKind, ProposalSpec, RunConfig, SamplerKind,
};
pub use output::{read_chain_csv, write_chain_csv, ChainOutput, ChainTable, StepRecord};

/// Outcome of the acceptance computation for one proposed move.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub ensemble: AcceptanceEnsemble,
    /// Ensemble width after each round (ASL and GPS).
    pub widths: Vec<f64>,
    pub rounds: usize,
    pub acquisitions: usize,
    pub budget_breach: bool,
    /// Failed simulations during this computation.
    pub failures: usize,
    /// Kernel pseudo-marginal: the estimate at the proposed point.
    proposed_loglik: Option<f64>,
}

impl Verdict {
    fn exact(alpha: f64) -> Self {
        Verdict {
            ensemble: AcceptanceEnsemble::exact(alpha),
            widths: Vec::new(),
            rounds: 0,
            acquisitions: 0,
            budget_breach: false,
            failures: 0,
            proposed_loglik: None,
        }
    }
}

/// Per-step report returned by [`Sampler::step`].
#[derive(Debug, Clone)]
pub struct StepReport {
    /// The proposed point, in sampling space.
    pub proposed: Vec<f64>,
    pub accepted: bool,
    pub verdict: Verdict,
    pub sim_calls: u64,
}

pub struct Sampler {
    cfg: RunConfig,
    sim: CountedSimulator,
    prior: Prior,
    kernel: EpsilonKernel,
    y: Vec<f64>,
    /// Observation in the surrogate's output space.
    y_gp: Vec<f64>,
    rng: RngStream,
    theta: Vec<f64>,
    cached_loglik: Option<f64>,
    surrogate: Option<SurrogateState>,
    chain_insertions: usize,
    init_calls: u64,
    step_index: usize,
}

impl Sampler {
    /// Validate the configuration and bind the simulator. No simulations run.
    pub fn new(cfg: RunConfig, observed: &[f64]) -> Result<Self> {
        cfg.validate()?;
        let inner = cfg.simulator.build()?;
        let spec = inner.spec().clone();
        if observed.len() != spec.stat_dim() || observed.iter().any(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "observed statistics must be {} finite values",
                spec.stat_dim()
            )));
        }
        let prior = Prior::new(cfg.prior.clone(), &spec)?;
        let theta = spec.to_sampling_space(&cfg.init);
        let y_gp = warp(&cfg.gp.output_transform, observed)
            .ok_or_else(|| Error::config("observed statistic outside the domain of gp.output_transform"))?;
        if !prior.log_density(&theta).is_finite() {
            return Err(Error::config("initial point has zero prior density"));
        }
        Ok(Sampler {
            kernel: EpsilonKernel::new(cfg.epsilon)?,
            sim: CountedSimulator::new(inner, cfg.seed),
            rng: RngStream::new(cfg.seed, CHAIN_STREAM),
            y: observed.to_vec(),
            y_gp,
            prior,
            theta,
            cached_loglik: None,
            surrogate: None,
            chain_insertions: 0,
            init_calls: 0,
            step_index: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn simulator(&self) -> &CountedSimulator {
        &self.sim
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    /// Current point in sampling space.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn surrogate(&self) -> Option<&SurrogateState> {
        self.surrogate.as_ref()
    }

    pub fn init_calls(&self) -> u64 {
        self.init_calls
    }

    /// Install a ready-made surrogate (GPS), skipping prior-draw
    /// initialisation.
    pub fn set_surrogate(&mut self, s: SurrogateState) -> Result<()> {
        let spec = self.sim.spec();
        if s.dim() != spec.param_dim() || s.stat_dim() != spec.stat_dim() {
            return Err(Error::invalid("surrogate dimensions do not match the simulator"));
        }
        self.surrogate = Some(s);
        Ok(())
    }

    /// Work done before the first step: the GPS surrogate is seeded with
    /// `S0` prior draws; pseudo-marginal kernel ABC estimates the likelihood
    /// at the starting point. These calls are outside every step.
    pub fn initialize(&mut self) -> Result<()> {
        let before = self.sim.counter().total();
        match self.cfg.sampler {
            SamplerKind::Gps if self.surrogate.is_none() => self.init_surrogate()?,
            SamplerKind::KernelPseudoMarginal if self.cached_loglik.is_none() => {
                let theta = self.theta.clone();
                let (ll, _) = self.kernel_loglik(&theta);
                self.cached_loglik = Some(ll);
            }
            _ => {}
        }
        self.init_calls += self.sim.counter().total() - before;
        Ok(())
    }

    fn init_surrogate(&mut self) -> Result<()> {
        let spec = self.sim.spec().clone();
        let mut rng = RngStream::new(self.cfg.seed, INIT_STREAM);
        let mut state = SurrogateState::new(spec.param_dim(), spec.stat_dim())?;
        let mut failures = 0;
        for _ in 0..self.cfg.s0 {
            let theta = self.prior.sample(&mut rng);
            match self.sim.simulate(&theta) {
                Ok(x) => match warp(&self.cfg.gp.output_transform, &x) {
                    Some(z) => state.push_point(&theta, &z)?,
                    None => failures += 1,
                },
                Err(e) if e.is_simulation_error() => failures += 1,
                Err(e) => return Err(e),
            }
        }
        if failures > 0 {
            log::warn!("{failures} of {} initial surrogate simulations failed", self.cfg.s0);
        }
        if state.len() < 2 {
            return Err(Error::NumericalDegeneracy {
                context: "fewer than two usable surrogate training points".into(),
                ridge: 0.0,
            });
        }
        state.init_hyperparams(self.cfg.gp.noise_floor_rel)?;
        state.fit_hyperparams(&self.fit_options());
        self.surrogate = Some(state);
        Ok(())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            steps: self.cfg.gp.fit_steps,
            max_points: self.cfg.gp.fit_max_points,
            noise_floor_rel: self.cfg.gp.noise_floor_rel,
        }
    }

    /// One MH step from the current state.
    pub fn step(&mut self) -> Result<StepReport> {
        self.sim.counter().begin_step();
        let theta = self.theta.clone();
        let theta_prime = self.cfg.proposal.propose(&theta, &mut self.rng);
        let verdict = self.evaluate(&theta, &theta_prime)?;
        let u = self.rng.uniform();
        let accepted = mh_decide(&verdict.ensemble, u) == Decision::Accept;
        if accepted {
            self.theta = theta_prime.clone();
            if self.cfg.sampler == SamplerKind::KernelPseudoMarginal {
                self.cached_loglik = verdict.proposed_loglik;
            }
        }
        self.step_index += 1;
        let sim_calls = self.sim.counter().end_step();
        Ok(StepReport {
            proposed: theta_prime,
            accepted,
            verdict,
            sim_calls,
        })
    }

    /// The acceptance ensemble for a move `theta -> theta_prime`, running
    /// whatever simulations or acquisitions the sampler needs. Does not draw
    /// `u` and does not move the chain.
    pub fn evaluate(&mut self, theta: &[f64], theta_prime: &[f64]) -> Result<Verdict> {
        let lp_prime = self.prior.log_density(theta_prime);
        if lp_prime == f64::NEG_INFINITY || lp_prime.is_nan() {
            return Ok(Verdict::exact(0.0));
        }
        let log_prior_ratio = lp_prime - self.prior.log_density(theta);
        let log_proposal_ratio = self.cfg.proposal.log_ratio(theta, theta_prime);
        let base = log_prior_ratio + log_proposal_ratio;
        match self.cfg.sampler {
            SamplerKind::KernelMarginal | SamplerKind::KernelPseudoMarginal => {
                self.kernel_verdict(theta, theta_prime, base)
            }
            SamplerKind::Asl => self.asl_verdict(theta, theta_prime, base),
            SamplerKind::Gps => self.gps_verdict(theta, theta_prime, base),
        }
    }

    fn parts(base: f64, proposed: f64, current: f64) -> AcceptanceRatioParts {
        AcceptanceRatioParts {
            log_prior_ratio: base,
            log_proposal_ratio: 0.0,
            loglik_proposed: proposed,
            loglik_current: current,
        }
    }

    /// Log of the kernel-smoothed likelihood estimate
    /// `(1/S) sum_s N(y; x_s, eps^2 I)`. A failed simulation contributes zero.
    fn kernel_loglik(&mut self, theta: &[f64]) -> (f64, usize) {
        let var = self.kernel.variance();
        let mut terms = Vec::with_capacity(self.cfg.s0);
        let mut failures = 0;
        for r in self.sim.simulate_batch(theta, self.cfg.s0) {
            match r {
                Ok(x) => terms.push(
                    x.iter()
                        .zip(&self.y)
                        .map(|(xi, yi)| normal_logpdf(*yi, *xi, var))
                        .sum::<f64>(),
                ),
                Err(e) => {
                    log::debug!("simulation failed: {e}");
                    failures += 1;
                }
            }
        }
        let ll = log_sum_exp(&terms) - (self.cfg.s0 as f64).ln();
        (ll, failures)
    }

    fn kernel_verdict(&mut self, theta: &[f64], theta_prime: &[f64], base: f64) -> Result<Verdict> {
        let (ll_prime, mut failures) = self.kernel_loglik(theta_prime);
        let ll = match self.cfg.sampler {
            SamplerKind::KernelPseudoMarginal => match self.cached_loglik {
                Some(v) => v,
                None => {
                    let (v, f) = self.kernel_loglik(theta);
                    failures += f;
                    self.cached_loglik = Some(v);
                    v
                }
            },
            _ => {
                let (v, f) = self.kernel_loglik(theta);
                failures += f;
                v
            }
        };
        let alpha = alpha_from_parts(&Self::parts(base, ll_prime, ll))?;
        let mut v = Verdict::exact(alpha);
        v.rounds = 1;
        v.failures = failures;
        v.proposed_loglik = Some(ll_prime);
        Ok(v)
    }

    /// Simulate `n` times; `None` if any call failed.
    fn batch(&mut self, theta: &[f64], n: usize, failures: &mut usize) -> Result<Option<Vec<Vec<f64>>>> {
        let mut out = Vec::with_capacity(n);
        let mut ok = true;
        for r in self.sim.simulate_batch(theta, n) {
            match r {
                Ok(x) => out.push(x),
                Err(e) if e.is_simulation_error() => {
                    log::debug!("simulation failed: {e}");
                    *failures += 1;
                    ok = false;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(ok.then_some(out))
    }

    fn asl_verdict(&mut self, theta: &[f64], theta_prime: &[f64], base: f64) -> Result<Verdict> {
        let cfg = &self.cfg;
        let (s0, ds, diag, m, grid, cap, xi) = (
            cfg.s0,
            cfg.delta_s,
            cfg.diagonal,
            cfg.m,
            cfg.grid,
            cfg.max_sims_per_step,
            cfg.xi,
        );
        let fixed = cfg.fixed_s();
        let mut failures = 0;
        let cur = self.batch(theta, s0, &mut failures)?;
        let prop = self.batch(theta_prime, s0, &mut failures)?;
        let (mut mc, mut mp) = match (cur, prop) {
            (_, None) => {
                let mut v = Verdict::exact(0.0);
                v.failures = failures;
                v.rounds = 1;
                return Ok(v);
            }
            (None, Some(_)) => {
                let mut v = Verdict::exact(1.0);
                v.failures = failures;
                v.rounds = 1;
                return Ok(v);
            }
            (Some(c), Some(p)) => (estimate_moments(&c, diag)?, estimate_moments(&p, diag)?),
        };

        if fixed {
            let fc = mc.likelihood_factor(&self.kernel)?;
            let fp = mp.likelihood_factor(&self.kernel)?;
            let alpha = alpha_from_parts(&Self::parts(
                base,
                fp.logpdf(&self.y, &mp.mu_hat),
                fc.logpdf(&self.y, &mc.mu_hat),
            ))?;
            let mut v = Verdict::exact(alpha);
            v.rounds = 1;
            return Ok(v);
        }

        let mut widths = Vec::new();
        let mut breach = false;
        loop {
            let ens = self.asl_ensemble(&mc, &mp, base, m, grid)?;
            widths.push(ens.width());
            if ens.error < xi {
                return Ok(Verdict {
                    ensemble: ens,
                    rounds: widths.len(),
                    widths,
                    acquisitions: 0,
                    budget_breach: breach,
                    failures,
                    proposed_loglik: None,
                });
            }
            if mc.s + ds > cap {
                breach = true;
                log::warn!(
                    "step {}: ASL budget of {cap} simulations per location reached with error {:.4}",
                    self.step_index,
                    ens.error
                );
                return Ok(Verdict {
                    ensemble: ens,
                    rounds: widths.len(),
                    widths,
                    acquisitions: 0,
                    budget_breach: breach,
                    failures,
                    proposed_loglik: None,
                });
            }
            let more_c = self.batch(theta, ds, &mut failures)?;
            let more_p = self.batch(theta_prime, ds, &mut failures)?;
            match (more_c, more_p) {
                (_, None) => {
                    let mut v = Verdict::exact(0.0);
                    v.failures = failures;
                    v.rounds = widths.len() + 1;
                    v.widths = widths;
                    return Ok(v);
                }
                (None, Some(_)) => {
                    let mut v = Verdict::exact(1.0);
                    v.failures = failures;
                    v.rounds = widths.len() + 1;
                    v.widths = widths;
                    return Ok(v);
                }
                (Some(c), Some(p)) => {
                    mc = mc.fold(&c)?;
                    mp = mp.fold(&p)?;
                }
            }
        }
    }

    fn asl_ensemble(
        &mut self,
        mc: &MomentEstimate,
        mp: &MomentEstimate,
        base: f64,
        m: usize,
        grid: usize,
    ) -> Result<AcceptanceEnsemble> {
        let fc = mc.likelihood_factor(&self.kernel)?;
        let fp = mp.likelihood_factor(&self.kernel)?;
        let sc = mc.mean_sampler()?;
        let sp = mp.mean_sampler()?;
        let mut alphas = Vec::with_capacity(m);
        for _ in 0..m {
            let mu_c = sc.draw(&mut self.rng);
            let mu_p = sp.draw(&mut self.rng);
            alphas.push(alpha_from_parts(&Self::parts(
                base,
                fp.logpdf(&self.y, &mu_p),
                fc.logpdf(&self.y, &mu_c),
            ))?);
        }
        AcceptanceEnsemble::from_alphas(alphas, grid)
    }

    fn gps_ensemble(
        &mut self,
        theta: &[f64],
        theta_prime: &[f64],
        base: f64,
    ) -> Result<(AcceptanceEnsemble, Vec<BivariatePredictive>)> {
        let s = self.surrogate.as_ref().ok_or_else(|| Error::invalid("GPS sampler is not initialised"))?;
        let ev = self.kernel.variance();
        let preds = (0..s.stat_dim())
            .map(|j| {
                let var = s.hyperparams(j).noise_variance + ev;
                s.gp_bivariate_predict(j, theta, theta_prime).map(|p| (p, var))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut alphas = Vec::with_capacity(self.cfg.m);
        for _ in 0..self.cfg.m {
            let mut lp = 0.0;
            let mut lc = 0.0;
            for (j, (p, var)) in preds.iter().enumerate() {
                let (mu_p, mu_c) = sample_bivariate(p, &mut self.rng);
                lp += normal_logpdf(self.y_gp[j], mu_p, *var);
                lc += normal_logpdf(self.y_gp[j], mu_c, *var);
            }
            alphas.push(alpha_from_parts(&Self::parts(base, lp, lc))?);
        }
        let ens = AcceptanceEnsemble::from_alphas(alphas, self.cfg.grid)?;
        Ok((ens, preds.into_iter().map(|(p, _)| p).collect()))
    }

    /// Simulate at `at` and insert the result; on failure try `other` once.
    fn acquire(&mut self, at: &[f64], other: &[f64], failures: &mut usize) -> Result<bool> {
        for loc in [at, other] {
            match self.sim.simulate(loc) {
                Ok(x) => {
                    let Some(z) = warp(&self.cfg.gp.output_transform, &x) else {
                        log::debug!("simulator output {x:?} outside the output warp domain");
                        *failures += 1;
                        continue;
                    };
                    let s = self.surrogate.as_mut().expect("surrogate present");
                    s.insert_training_point(loc, &z)?;
                    self.chain_insertions += 1;
                    if self.cfg.gp.fit_due(self.chain_insertions) {
                        let opts = self.fit_options();
                        self.surrogate.as_mut().unwrap().fit_hyperparams(&opts);
                    }
                    return Ok(true);
                }
                Err(e) if e.is_simulation_error() => {
                    log::debug!("acquisition simulation failed: {e}");
                    *failures += 1;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(false)
    }

    fn gps_verdict(&mut self, theta: &[f64], theta_prime: &[f64], base: f64) -> Result<Verdict> {
        let mut widths = Vec::new();
        let mut acquisitions = 0;
        let mut failures = 0;
        let mut breach = false;
        loop {
            let (ens, preds) = self.gps_ensemble(theta, theta_prime, base)?;
            widths.push(ens.width());
            if ens.error < self.cfg.xi || !self.cfg.gp.acquire {
                return Ok(Verdict {
                    ensemble: ens,
                    rounds: widths.len(),
                    widths,
                    acquisitions,
                    budget_breach: breach,
                    failures,
                    proposed_loglik: None,
                });
            }
            if acquisitions >= self.cfg.max_acquisitions {
                breach = true;
                log::warn!(
                    "step {}: GPS budget of {} acquisitions reached with error {:.4}",
                    self.step_index,
                    self.cfg.max_acquisitions,
                    ens.error
                );
                return Ok(Verdict {
                    ensemble: ens,
                    rounds: widths.len(),
                    widths,
                    acquisitions,
                    budget_breach: breach,
                    failures,
                    proposed_loglik: None,
                });
            }
            let (at, other) = match acquire_from_predictives(&preds) {
                Acquire::Proposed => (theta_prime, theta),
                Acquire::Current => (theta, theta_prime),
            };
            self.acquire(at, other, &mut failures)?;
            acquisitions += 1;
        }
    }

    /// Initialise and run the full chain.
    pub fn run(mut self) -> Result<ChainOutput> {
        let start = Instant::now();
        self.initialize()?;
        let spec = self.sim.spec().clone();
        let mut steps = Vec::with_capacity(self.cfg.chain_length);
        for i in 0..self.cfg.chain_length {
            let r = self.step()?;
            steps.push(StepRecord {
                step: i,
                accepted: r.accepted,
                tau: r.verdict.ensemble.tau,
                error: r.verdict.ensemble.error,
                sim_calls: r.sim_calls,
                rounds: r.verdict.rounds,
                acquisitions: r.verdict.acquisitions,
                budget_breach: r.verdict.budget_breach,
                failures: r.verdict.failures,
                theta: spec.to_simulator_space(&self.theta),
                widths: r.verdict.widths,
            });
        }
        let total_calls = self.sim.counter().total();
        Ok(ChainOutput {
            sampler: self.cfg.sampler,
            param_names: spec.param_names.clone(),
            observed: self.y.clone(),
            burn_in: self.cfg.burn_in,
            init_calls: self.init_calls,
            total_calls,
            wall_time_secs: start.elapsed().as_secs_f64(),
            steps,
            surrogate: self.surrogate,
        })
    }
}

/// Build a sampler for `cfg` and run it to completion.
pub fn run_chain(cfg: &RunConfig, observed: &[f64]) -> Result<ChainOutput> {
    Sampler::new(cfg.clone(), observed)?.run()
}

/// Apply per-statistic output warps; `None` if a value leaves the domain.
fn warp(t: &[Transform], x: &[f64]) -> Option<Vec<f64>> {
    if t.is_empty() {
        return Some(x.to_vec());
    }
    let z: Vec<f64> = t.iter().zip(x).map(|(t, v)| t.to_sampling(*v)).collect();
    z.iter().all(|v| v.is_finite()).then_some(z)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
