//! Randomised Metropolis-Hastings acceptance.
//!
//! Uncertainty in the likelihood estimates induces a distribution over the
//! acceptance probability. It is represented by `M` Monte-Carlo draws; the
//! decision threshold is their median and the decision error is the area
//! under their empirical CDF folded at the median.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 50;
pub const DEFAULT_GRID_SIZE: usize = 201;

/// Log-space pieces of a Metropolis-Hastings ratio.
///
/// `log_proposal_ratio` is `log q(theta | theta') - log q(theta' | theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceRatioParts {
    pub log_prior_ratio: f64,
    pub log_proposal_ratio: f64,
    pub loglik_proposed: f64,
    pub loglik_current: f64,
}

impl AcceptanceRatioParts {
    pub fn log_ratio(&self) -> f64 {
        self.log_prior_ratio + self.log_proposal_ratio + self.loglik_proposed - self.loglik_current
    }
}

/// `min(1, exp(log ratio))`, with an impossible proposal mapped to zero and
/// an impossible current state (but possible proposal) mapped to one.
pub fn alpha_from_parts(parts: &AcceptanceRatioParts) -> Result<f64> {
    let all = [
        parts.log_prior_ratio,
        parts.log_proposal_ratio,
        parts.loglik_proposed,
        parts.loglik_current,
    ];
    if all.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid(format!("NaN in acceptance ratio parts {parts:?}")));
    }
    if parts.loglik_proposed == f64::NEG_INFINITY || parts.log_prior_ratio == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if parts.loglik_current == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let r = parts.log_ratio();
    if r.is_nan() {
        return Err(Error::invalid(format!("undefined acceptance ratio from {parts:?}")));
    }
    Ok(if r >= 0.0 { 1.0 } else { r.exp() })
}

/// Lower median: order statistic `ceil(M / 2)` (1-based).
pub fn lower_median(alphas: &[f64]) -> f64 {
    assert!(!alphas.is_empty(), "median of an empty ensemble");
    let mut v = alphas.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v[(v.len() - 1) / 2]
}

/// Probability of a wrong decision given the uniform draw `u`: if `u <= tau`
/// the fraction of alphas strictly below `u`, otherwise the fraction at or
/// above `u`.
pub fn conditional_error(alphas: &[f64], u: f64, tau: f64) -> f64 {
    let m = alphas.len() as f64;
    let count = if u <= tau {
        alphas.iter().filter(|&&a| a < u).count()
    } else {
        alphas.iter().filter(|&&a| a >= u).count()
    };
    count as f64 / m
}

/// Midpoint-rule integral of [`conditional_error`] over `u` in [0, 1].
pub fn unconditional_error(alphas: &[f64], tau: f64, grid_size: usize) -> f64 {
    assert!(grid_size >= 2, "grid size must be at least 2");
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted_unconditional_error(&sorted, tau, grid_size)
}

fn sorted_unconditional_error(sorted: &[f64], tau: f64, grid_size: usize) -> f64 {
    let m = sorted.len();
    let h = 1.0 / grid_size as f64;
    let mut total = 0usize;
    for i in 0..grid_size {
        let u = (i as f64 + 0.5) * h;
        let below = sorted.partition_point(|&a| a < u);
        total += if u <= tau { below } else { m - below };
    }
    total as f64 * h / m as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// Draws of the acceptance probability with their median and decision error.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceEnsemble {
    pub alphas: Vec<f64>,
    pub tau: f64,
    pub error: f64,
}

impl AcceptanceEnsemble {
    pub fn from_alphas(alphas: Vec<f64>, grid_size: usize) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::invalid("empty acceptance ensemble"));
        }
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("acceptance probabilities must lie in [0, 1]"));
        }
        let mut sorted = alphas.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let tau = sorted[(sorted.len() - 1) / 2];
        let error = sorted_unconditional_error(&sorted, tau, grid_size);
        Ok(AcceptanceEnsemble { alphas, tau, error })
    }

    /// A single known acceptance probability: no decision uncertainty.
    pub fn exact(alpha: f64) -> Self {
        AcceptanceEnsemble {
            alphas: vec![alpha],
            tau: alpha,
            error: 0.0,
        }
    }

    /// `max - min` of the draws.
    pub fn width(&self) -> f64 {
        let lo = self.alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// Accept iff `u <= tau`.
pub fn mh_decide(ens: &AcceptanceEnsemble, u: f64) -> Decision {
    if u <= ens.tau {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn parts(r: f64) -> AcceptanceRatioParts {
        AcceptanceRatioParts {
            log_prior_ratio: 0.0,
            log_proposal_ratio: 0.0,
            loglik_proposed: r,
            loglik_current: 0.0,
        }
    }

    /// Folded-CDF area computed in closed form: mean absolute deviation about tau.
    fn mad(alphas: &[f64], tau: f64) -> f64 {
        alphas.iter().map(|a| (a - tau).abs()).sum::<f64>() / alphas.len() as f64
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_from_parts(&parts(0.0)).unwrap(), 1.0);
        assert!((alpha_from_parts(&parts(0.25f64.ln())).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(alpha_from_parts(&parts(50.0)).unwrap(), 1.0);
        assert_eq!(alpha_from_parts(&parts(1e308)).unwrap(), 1.0);
        assert_eq!(alpha_from_parts(&parts(f64::NEG_INFINITY)).unwrap(), 0.0);
        assert!(alpha_from_parts(&parts(f64::NAN)).is_err());
        let mut p = parts(-1.0);
        p.loglik_current = f64::NEG_INFINITY;
        assert_eq!(alpha_from_parts(&p).unwrap(), 1.0);
        p.loglik_proposed = f64::NEG_INFINITY;
        assert_eq!(alpha_from_parts(&p).unwrap(), 0.0);
    }

    #[test]
    fn conditional_error_examples() {
        assert_eq!(conditional_error(&[0.2, 0.8], 0.3, 0.5), 0.5);
        assert_eq!(conditional_error(&[0.4; 7], 0.4, 0.4), 0.0);
        assert_eq!(conditional_error(&[0.2, 0.8], 0.9, 0.5), 0.0);
    }

    #[test]
    fn unconditional_error_examples() {
        assert_eq!(unconditional_error(&[0.37; 10], 0.37, 201), 0.0);
        let e = unconditional_error(&[0.2, 0.8], 0.5, 201);
        assert!((e - 0.3).abs() < 2.0 / 201.0, "{e}");
    }

    #[test]
    fn lower_median_even_and_odd() {
        assert_eq!(lower_median(&[0.9, 0.1, 0.5, 0.3]), 0.3);
        assert_eq!(lower_median(&[0.9, 0.1, 0.5]), 0.5);
    }

    #[test]
    fn decide_boundaries() {
        assert_eq!(mh_decide(&AcceptanceEnsemble::exact(1.0), 0.999), Decision::Accept);
        assert_eq!(mh_decide(&AcceptanceEnsemble::exact(0.0), 0.0), Decision::Accept);
        assert_eq!(mh_decide(&AcceptanceEnsemble::exact(0.0), 0.001), Decision::Reject);
        assert_eq!(mh_decide(&AcceptanceEnsemble::exact(0.5), 0.5), Decision::Accept);
    }

    #[test]
    fn ensemble_rejects_out_of_range() {
        assert!(AcceptanceEnsemble::from_alphas(vec![0.5, 1.2], 201).is_err());
        assert!(AcceptanceEnsemble::from_alphas(vec![], 201).is_err());
    }

    fn alphas_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..=1.0, 1..80)
    }

    proptest! {
        #[test]
        fn error_is_bounded_by_half(alphas in alphas_strategy()) {
            let ens = AcceptanceEnsemble::from_alphas(alphas, 201).unwrap();
            prop_assert!(ens.error >= 0.0 && ens.error <= 0.5);
        }

        #[test]
        fn grid_matches_mad(alphas in alphas_strategy()) {
            let ens = AcceptanceEnsemble::from_alphas(alphas.clone(), 201).unwrap();
            prop_assert!((ens.error - mad(&alphas, ens.tau)).abs() <= 2.0 / 201.0);
        }

        #[test]
        fn shift_bound(alphas in alphas_strategy()) {
            let lo = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ens = AcceptanceEnsemble::from_alphas(alphas, 201).unwrap();
            // grid discretisation adds at most one cell per side
            prop_assert!(ens.error <= (hi - lo) / 2.0 + 2.0 / 201.0);
        }
    }

    #[test]
    fn monte_carlo_u_converges_to_grid() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..20 {
            let alphas: Vec<f64> = (0..50).map(|_| rng.uniform().powi(2)).collect();
            let tau = lower_median(&alphas);
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| conditional_error(&alphas, rng.uniform(), tau)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            let exact = mad(&alphas, tau);
            assert!((mean - exact).abs() < 3.0 * se + 1e-12, "{mean} vs {exact} (se {se})");
            let grid = unconditional_error(&alphas, tau, 201);
            assert!((grid - exact).abs() < 2.0 / 201.0);
        }
    }
}
