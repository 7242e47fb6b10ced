use lfabc::harness::presets::{exp_toy_config, EXP_PRIOR_RATE, EXP_PRIOR_SHAPE, EXP_THETA_STAR};
use lfabc::harness::{analytic_exponential_posterior, generate_observed};
use lfabc::rng::RngStream;
use lfabc::samplers::{run_chain, PriorComponent, SamplerKind};

#[test]
fn asl_ensembles_narrow_with_refinement() {
    let mut cfg = exp_toy_config(SamplerKind::Asl, 5, 0.05, 21);
    cfg.init = vec![0.1];
    cfg.chain_length = 500;
    cfg.burn_in = 0;
    let y = generate_observed(&cfg.simulator, &[EXP_THETA_STAR], 21).unwrap();
    let out = run_chain(&cfg, &y).unwrap();
    let refined: Vec<&Vec<f64>> = out.steps.iter().map(|s| &s.widths).filter(|w| w.len() >= 2).collect();
    assert!(refined.len() >= 20, "only {} steps refined", refined.len());
    let n = refined.len() as f64;
    let w1 = refined.iter().map(|w| w[0]).sum::<f64>() / n;
    let w2 = refined.iter().map(|w| w[1]).sum::<f64>() / n;
    assert!(w2 < w1, "round widths {w1} -> {w2}");
}

#[test]
fn huge_epsilon_kernel_matches_prior_only_sampler() {
    let prior_mean = EXP_THETA_STAR.ln();
    let mut cfg = exp_toy_config(SamplerKind::KernelMarginal, 1, 0.05, 8);
    cfg.epsilon = 1e6;
    cfg.prior = vec![PriorComponent::Normal { mean: prior_mean, std: 1.0 }];
    cfg.proposal.stds = vec![1.0];
    cfg.init = vec![EXP_THETA_STAR];
    cfg.chain_length = 20_000;
    cfg.burn_in = 0;
    let y = generate_observed(&cfg.simulator, &[EXP_THETA_STAR], 8).unwrap();
    let out = run_chain(&cfg, &y).unwrap();
    let a = out.acceptance_rate();

    // Prior-only random-walk Metropolis on the same log-space prior.
    let mut rng = RngStream::new(80, 0);
    let mut s = prior_mean;
    let n = 20_000;
    let mut acc = 0usize;
    for _ in 0..n {
        let p = s + rng.standard_normal();
        let lr = -0.5 * ((p - prior_mean).powi(2) - (s - prior_mean).powi(2));
        if rng.uniform().ln() <= lr {
            s = p;
            acc += 1;
        }
    }
    let b = acc as f64 / n as f64;
    let se = (a * (1.0 - a) / cfg.chain_length as f64 + b * (1.0 - b) / n as f64).sqrt();
    assert!((a - b).abs() <= 3.0 * se, "kernel {a} vs prior-only {b} (se {se})");
}

#[test]
fn chain_reaches_posterior_from_far_start() {
    let cfg = {
        let mut c = exp_toy_config(SamplerKind::Asl, 5, 0.05, 4);
        c.chain_length = 1_000;
        c.burn_in = 0;
        c
    };
    assert_eq!(cfg.init, vec![1.0]);
    let y = generate_observed(&cfg.simulator, &[EXP_THETA_STAR], 4).unwrap();
    let post = analytic_exponential_posterior(EXP_PRIOR_SHAPE, EXP_PRIOR_RATE, 500, y[0]).unwrap();
    let out = run_chain(&cfg, &y).unwrap();
    let hit = out
        .steps
        .iter()
        .position(|s| (s.theta[0] - post.mean()).abs() < 2.0 * post.std());
    assert!(hit.is_some(), "never within two posterior std of {}", post.mean());
}
