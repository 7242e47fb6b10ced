//! Sample moments of simulation batches and the Gaussian synthetic likelihood.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::{psd_factor, sample_with_factor, MvnFactor};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Sample mean and unbiased sample covariance of `s` statistic vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mu_hat: Vec<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub s: usize,
    pub diagonal: bool,
}

/// Gaussian ABC kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonKernel {
    pub epsilon: f64,
}

impl EpsilonKernel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
        }
        Ok(EpsilonKernel { epsilon })
    }

    pub fn variance(&self) -> f64 {
        self.epsilon * self.epsilon
    }
}

fn check_batch(batch: &[Vec<f64>]) -> Result<usize> {
    if batch.len() < 2 {
        return Err(Error::InsufficientSamples {
            need: 2,
            got: batch.len(),
        });
    }
    let j = batch[0].len();
    if j == 0 {
        return Err(Error::invalid("statistic vectors are empty"));
    }
    for x in batch {
        if x.len() != j {
            return Err(Error::invalid("statistic vectors have differing lengths"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("statistic vector has non-finite entries"));
        }
    }
    Ok(j)
}

/// Batch mean and `(S - 1)`-normalised covariance. With `diagonal`, the
/// off-diagonal entries are set to exactly zero.
pub fn estimate_moments(batch: &[Vec<f64>], diagonal: bool) -> Result<MomentEstimate> {
    let j = check_batch(batch)?;
    let s = batch.len();
    let mut mu = vec![0.0; j];
    for x in batch {
        for (m, v) in mu.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= s as f64;
    }
    let scatter = scatter_about(batch, &mu, diagonal);
    Ok(MomentEstimate {
        mu_hat: mu,
        sigma_hat: scatter / (s as f64 - 1.0),
        s,
        diagonal,
    })
}

fn scatter_about(batch: &[Vec<f64>], mu: &[f64], diagonal: bool) -> DMatrix<f64> {
    let j = mu.len();
    let mut c = DMatrix::<f64>::zeros(j, j);
    for x in batch {
        for a in 0..j {
            let da = x[a] - mu[a];
            if diagonal {
                c[(a, a)] += da * da;
                continue;
            }
            for b in 0..=a {
                c[(a, b)] += da * (x[b] - mu[b]);
            }
        }
    }
    for a in 0..j {
        for b in 0..a {
            c[(b, a)] = c[(a, b)];
        }
    }
    c
}

impl MomentEstimate {
    pub fn dim(&self) -> usize {
        self.mu_hat.len()
    }

    /// Fold another batch into the estimate (pairwise mean/scatter update).
    pub fn fold(&self, batch: &[Vec<f64>]) -> Result<MomentEstimate> {
        if batch.is_empty() {
            return Ok(self.clone());
        }
        let j = self.dim();
        if batch.iter().any(|x| x.len() != j || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("batch does not match the estimate's dimension"));
        }
        let na = self.s as f64;
        let nb = batch.len() as f64;
        let n = na + nb;
        let mut mu_b = vec![0.0; j];
        for x in batch {
            for (m, v) in mu_b.iter_mut().zip(x) {
                *m += v;
            }
        }
        for m in mu_b.iter_mut() {
            *m /= nb;
        }
        let scatter_b = scatter_about(batch, &mu_b, self.diagonal);
        let delta: Vec<f64> = mu_b.iter().zip(&self.mu_hat).map(|(b, a)| b - a).collect();
        let mut scatter = &self.sigma_hat * (na - 1.0) + scatter_b;
        let w = na * nb / n;
        for a in 0..j {
            for b in 0..j {
                if self.diagonal && a != b {
                    continue;
                }
                scatter[(a, b)] += w * delta[a] * delta[b];
            }
        }
        let mu: Vec<f64> = self
            .mu_hat
            .iter()
            .zip(&delta)
            .map(|(m, d)| m + d * nb / n)
            .collect();
        Ok(MomentEstimate {
            mu_hat: mu,
            sigma_hat: scatter / (n - 1.0),
            s: self.s + batch.len(),
            diagonal: self.diagonal,
        })
    }

    /// `sigma_hat + epsilon^2 I`.
    pub fn kernel_covariance(&self, k: &EpsilonKernel) -> DMatrix<f64> {
        let mut c = self.sigma_hat.clone();
        for i in 0..self.dim() {
            c[(i, i)] += k.variance();
        }
        c
    }

    /// Factor of the synthetic-likelihood covariance, reusable across means.
    pub fn likelihood_factor(&self, k: &EpsilonKernel) -> Result<MvnFactor> {
        MvnFactor::new(&self.kernel_covariance(k))
    }

    /// Sampler for the mean `mu ~ N(mu_hat, sigma_hat / S)`.
    pub fn mean_sampler(&self) -> Result<MeanSampler> {
        if self.s < 2 {
            return Err(Error::InsufficientSamples { need: 2, got: self.s });
        }
        let cov = &self.sigma_hat / self.s as f64;
        Ok(MeanSampler {
            mean: self.mu_hat.clone(),
            lower: psd_factor(&cov)?,
        })
    }
}

/// Draws of the estimated statistic mean.
#[derive(Debug, Clone)]
pub struct MeanSampler {
    mean: Vec<f64>,
    lower: DMatrix<f64>,
}

impl MeanSampler {
    pub fn draw(&self, rng: &mut RngStream) -> Vec<f64> {
        sample_with_factor(&self.mean, &self.lower, rng)
    }
}

/// `log N(y; mu_hat, sigma_hat + epsilon^2 I)`.
pub fn synthetic_loglik(y: &[f64], m: &MomentEstimate, k: &EpsilonKernel) -> Result<f64> {
    if y.len() != m.dim() {
        return Err(Error::invalid(format!(
            "observation has {} statistics, estimate has {}",
            y.len(),
            m.dim()
        )));
    }
    Ok(m.likelihood_factor(k)?.logpdf(y, &m.mu_hat))
}

/// One draw of `mu ~ N(mu_hat, sigma_hat / S)`.
pub fn sample_mean_posterior(m: &MomentEstimate, rng: &mut RngStream) -> Result<Vec<f64>> {
    Ok(m.mean_sampler()?.draw(rng))
}
