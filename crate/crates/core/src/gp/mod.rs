//! Independent Gaussian-process surrogates, one per summary statistic.
//!
//! All statistics share the training inputs (one simulation yields every
//! statistic). Each GP uses an ARD squared-exponential kernel and a constant
//! prior mean equal to the mean of its training outputs. Cholesky factors of
//! `K + noise I` are cached and grown in place when points are inserted.

mod checkpoint;
mod chol;
mod fit;

use serde::{Deserialize, Serialize};

use crate::dist::{RIDGE_MAX, RIDGE_START};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use chol::{dot, GrowingCholesky};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use fit::{log_marginal_likelihood, FitOptions, FitReport, HyperGradient};

/// Noise never drops below this fraction of the signal variance inside a
/// factorization.
pub const MIN_NOISE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub signal_variance: f64,
    pub length_scales: Vec<f64>,
    pub noise_variance: f64,
}

impl GpHyperparams {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let h = GpHyperparams {
            signal_variance,
            length_scales,
            noise_variance,
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.signal_variance > 0.0
            && self.signal_variance.is_finite()
            && self.noise_variance >= 0.0
            && self.noise_variance.is_finite()
            && !self.length_scales.is_empty()
            && self.length_scales.iter().all(|l| *l > 0.0 && l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid GP hyperparameters {self:?}")))
        }
    }

    /// Squared-exponential ARD kernel.
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        self.signal_variance * (-0.5 * r2).exp()
    }

    fn factor_noise(&self) -> f64 {
        self.noise_variance.max(MIN_NOISE_REL * self.signal_variance)
    }
}

/// Joint predictive of the latent statistic mean at `(theta', theta)`.
/// Index 0 is the proposed point, index 1 the current point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariatePredictive {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl BivariatePredictive {
    /// Lower factor of the 2x2 covariance; a non-positive Schur complement is
    /// treated as exact rank deficiency.
    fn lower(&self) -> [f64; 3] {
        let a = self.cov[0][0].max(0.0);
        if a == 0.0 {
            return [0.0, 0.0, self.cov[1][1].max(0.0).sqrt()];
        }
        let l11 = a.sqrt();
        let l21 = self.cov[1][0] / l11;
        let l22 = (self.cov[1][1] - l21 * l21).max(0.0).sqrt();
        [l11, l21, l22]
    }
}

/// One correlated draw `(mu_theta', mu_theta)`.
pub fn sample_bivariate(b: &BivariatePredictive, rng: &mut RngStream) -> (f64, f64) {
    let [l11, l21, l22] = b.lower();
    let z1 = rng.standard_normal();
    let z2 = rng.standard_normal();
    (b.mean[0] + l11 * z1, b.mean[1] + l21 * z1 + l22 * z2)
}

/// Which of the two MH points to simulate at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acquire {
    Current,
    Proposed,
}

/// Per-statistic cache. With `K + noise I = L L^T`, predictions use
/// `L^-1 y` and `L^-1 1` so that the constant mean can change on every
/// insertion without a backward solve.
/// Acquisition rule given the summed latent variances at the two points.
pub fn acquire_by_variance(var_proposed: f64, var_current: f64) -> Acquire {
    if var_proposed >= var_current {
        Acquire::Proposed
    } else {
        Acquire::Current
    }
}

/// Acquisition rule from per-statistic bivariate predictives (same ordering
/// as [`SurrogateState::acquire_location`]).
pub fn acquire_from_predictives(preds: &[BivariatePredictive]) -> Acquire {
    let vp: f64 = preds.iter().map(|p| p.cov[0][0]).sum();
    let vc: f64 = preds.iter().map(|p| p.cov[1][1]).sum();
    acquire_by_variance(vp, vc)
}

#[derive(Debug, Clone)]
struct StatGp {
    hyper: GpHyperparams,
    jitter: f64,
    chol: GrowingCholesky,
    prior_mean: f64,
    z_y: Vec<f64>,
    z_one: Vec<f64>,
    /// `L^-1 (y - prior_mean)`.
    w: Vec<f64>,
}

/// Training data and cached factorizations for `J` independent GPs.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    gps: Vec<StatGp>,
    insertions: usize,
}

impl SurrogateState {
    /// Empty surrogate with unit signal variance and length scales.
    pub fn new(dim: usize, stat_dim: usize) -> Result<Self> {
        let h = GpHyperparams::new(1.0, vec![1.0; dim], 1e-6)?;
        Self::with_hyperparams(dim, vec![h; stat_dim])
    }

    pub fn with_hyperparams(dim: usize, hypers: Vec<GpHyperparams>) -> Result<Self> {
        if dim == 0 || hypers.is_empty() {
            return Err(Error::invalid("surrogate needs D >= 1 and J >= 1"));
        }
        for h in &hypers {
            h.validate()?;
            if h.length_scales.len() != dim {
                return Err(Error::invalid("length-scale count must equal the input dimension"));
            }
        }
        Ok(SurrogateState {
            dim,
            inputs: Vec::new(),
            outputs: Vec::new(),
            gps: hypers
                .into_iter()
                .map(|hyper| StatGp {
                    hyper,
                    jitter: 0.0,
                    chol: GrowingCholesky::new(),
                    prior_mean: 0.0,
                    z_y: Vec::new(),
                    z_one: Vec::new(),
                    w: Vec::new(),
                })
                .collect(),
            insertions: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stat_dim(&self) -> usize {
        self.gps.len()
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    /// Points inserted through [`insert_training_point`](Self::insert_training_point).
    pub fn insertions(&self) -> usize {
        self.insertions
    }

    pub fn hyperparams(&self, j: usize) -> &GpHyperparams {
        &self.gps[j].hyper
    }

    pub fn jitter(&self, j: usize) -> f64 {
        self.gps[j].jitter
    }

    pub fn prior_mean(&self, j: usize) -> f64 {
        self.gps[j].prior_mean
    }

    /// Column `j` of the output matrix.
    pub fn output_column(&self, j: usize) -> Vec<f64> {
        self.outputs.iter().map(|x| x[j]).collect()
    }

    /// Replace the hyperparameters of statistic `j` and refactor.
    pub fn set_hyperparams(&mut self, j: usize, h: GpHyperparams) -> Result<()> {
        h.validate()?;
        if h.length_scales.len() != self.dim {
            return Err(Error::invalid("length-scale count must equal the input dimension"));
        }
        self.gps[j].hyper = h;
        self.rebuild_stat(j, 0.0)
    }

    fn check_point(&self, theta: &[f64], x: Option<&[f64]>) -> Result<()> {
        if theta.len() != self.dim || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "training input must be {} finite values",
                self.dim
            )));
        }
        if let Some(x) = x {
            if x.len() != self.stat_dim() || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "training output must be {} finite values",
                    self.stat_dim()
                )));
            }
        }
        Ok(())
    }

    /// Add a training pair to all `J` GPs.
    pub fn insert_training_point(&mut self, theta: &[f64], x: &[f64]) -> Result<()> {
        self.push_point(theta, x)?;
        self.insertions += 1;
        Ok(())
    }

    /// Add a training pair without counting it as an insertion (used while
    /// seeding the surrogate).
    pub fn push_point(&mut self, theta: &[f64], x: &[f64]) -> Result<()> {
        self.check_point(theta, Some(x))?;
        self.inputs.push(theta.to_vec());
        self.outputs.push(x.to_vec());
        let n = self.inputs.len();
        for j in 0..self.stat_dim() {
            let gp = &mut self.gps[j];
            let k: Vec<f64> = self.inputs[..n - 1]
                .iter()
                .map(|t| gp.hyper.kernel(t, theta))
                .collect();
            let k_self = gp.hyper.signal_variance + gp.hyper.factor_noise() + gp.jitter;
            if gp.chol.push(&k, k_self).is_err() {
                let jitter = gp.jitter;
                self.rebuild_stat(j, jitter)?;
            } else {
                gp.chol.extend_forward(&mut gp.z_y, x[j]);
                gp.chol.extend_forward(&mut gp.z_one, 1.0);
                self.refresh_mean(j);
            }
        }
        Ok(())
    }

    fn refresh_mean(&mut self, j: usize) {
        let n = self.outputs.len();
        let sum: f64 = self.outputs.iter().map(|x| x[j]).sum();
        let gp = &mut self.gps[j];
        gp.prior_mean = if n == 0 { 0.0 } else { sum / n as f64 };
        let m = gp.prior_mean;
        gp.w = gp.z_y.iter().zip(&gp.z_one).map(|(a, b)| a - m * b).collect();
    }

    fn try_factor(&self, j: usize, jitter: f64) -> Result<GrowingCholesky> {
        let h = &self.gps[j].hyper;
        let diag = h.signal_variance + h.factor_noise() + jitter;
        let mut ch = GrowingCholesky::new();
        for (i, t) in self.inputs.iter().enumerate() {
            let k: Vec<f64> = self.inputs[..i].iter().map(|s| h.kernel(s, t)).collect();
            ch.push(&k, diag)?;
        }
        Ok(ch)
    }

    /// Cold refactorization of statistic `j`, escalating the jitter by the
    /// ridge policy when needed.
    fn rebuild_stat(&mut self, j: usize, start_jitter: f64) -> Result<()> {
        let sv = self.gps[j].hyper.signal_variance;
        let mut candidates = vec![start_jitter];
        let mut rel = RIDGE_START;
        while rel <= RIDGE_MAX * (1.0 + 1e-12) {
            if rel * sv > start_jitter {
                candidates.push(rel * sv);
            }
            rel *= 10.0;
        }
        let mut last = start_jitter;
        for jitter in candidates {
            last = jitter;
            if let Ok(ch) = self.try_factor(j, jitter) {
                if jitter > 0.0 {
                    log::debug!("statistic {j}: kernel factorization needed jitter {jitter:e}");
                }
                let col = self.output_column(j);
                let ones = vec![1.0; col.len()];
                let gp = &mut self.gps[j];
                (gp.z_y, gp.z_one) = ch.forward_pair(&col, &ones);
                gp.chol = ch;
                gp.jitter = jitter;
                self.refresh_mean(j);
                return Ok(());
            }
        }
        Err(Error::NumericalDegeneracy {
            context: format!("GP kernel matrix for statistic {j}"),
            ridge: last,
        })
    }

    /// Refactor every statistic from scratch with the current hyperparameters.
    pub fn rebuild(&mut self) -> Result<()> {
        for j in 0..self.stat_dim() {
            self.rebuild_stat(j, 0.0)?;
        }
        Ok(())
    }

    /// Predictive mean and latent variance of statistic `j` at `theta`.
    pub fn predict_marginal(&self, j: usize, theta: &[f64]) -> (f64, f64) {
        let gp = &self.gps[j];
        let k: Vec<f64> = self.inputs.iter().map(|t| gp.hyper.kernel(t, theta)).collect();
        let v = gp.chol.forward(&k);
        let mean = gp.prior_mean + dot(&v, &gp.w);
        let var = gp.hyper.signal_variance - dot(&v, &v);
        (mean, var.max(0.0))
    }

    /// Joint predictive of the latent mean of statistic `j` at the proposed
    /// point `theta_prime` and the current point `theta`.
    pub fn gp_bivariate_predict(
        &self,
        j: usize,
        theta: &[f64],
        theta_prime: &[f64],
    ) -> Result<BivariatePredictive> {
        if j >= self.stat_dim() {
            return Err(Error::invalid(format!("statistic index {j} out of range")));
        }
        self.check_point(theta, None)?;
        self.check_point(theta_prime, None)?;
        let gp = &self.gps[j];
        let h = &gp.hyper;
        let kp: Vec<f64> = self.inputs.iter().map(|t| h.kernel(t, theta_prime)).collect();
        let kc: Vec<f64> = self.inputs.iter().map(|t| h.kernel(t, theta)).collect();
        let (vp, vc) = gp.chol.forward_pair(&kp, &kc);
        let mean = [gp.prior_mean + dot(&vp, &gp.w), gp.prior_mean + dot(&vc, &gp.w)];
        let sv = h.signal_variance;
        let cross = h.kernel(theta_prime, theta) - dot(&vp, &vc);
        let cov = [
            [(sv - dot(&vp, &vp)).max(0.0), cross],
            [cross, (sv - dot(&vc, &vc)).max(0.0)],
        ];
        if mean.iter().any(|m| !m.is_finite()) || !cross.is_finite() {
            return Err(Error::NumericalDegeneracy {
                context: format!("GP prediction for statistic {j}"),
                ridge: gp.jitter,
            });
        }
        Ok(BivariatePredictive { mean, cov })
    }

    /// Sum over statistics of the latent predictive variance at `theta`.
    pub fn total_variance(&self, theta: &[f64]) -> f64 {
        (0..self.stat_dim()).map(|j| self.predict_marginal(j, theta).1).sum()
    }

    /// The point with the larger summed predictive variance; ties go to the
    /// proposed point.
    pub fn acquire_location(&self, theta: &[f64], theta_prime: &[f64]) -> Acquire {
        acquire_by_variance(self.total_variance(theta_prime), self.total_variance(theta))
    }

    /// Data-driven starting hyperparameters: signal variance from the output
    /// variance, length scales from the input spread, noise at a tenth of the
    /// output variance (never below the floor).
    pub fn init_hyperparams(&mut self, noise_floor_rel: f64) -> Result<()> {
        if self.len() < 2 {
            return Ok(());
        }
        let n = self.len() as f64;
        let scales: Vec<f64> = (0..self.dim)
            .map(|d| {
                let m = self.inputs.iter().map(|t| t[d]).sum::<f64>() / n;
                let v = self.inputs.iter().map(|t| (t[d] - m).powi(2)).sum::<f64>() / (n - 1.0);
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        for j in 0..self.stat_dim() {
            let var = fit::variance(&self.output_column(j));
            let sv = if var > 0.0 { var } else { 1.0 };
            let floor = fit::noise_floor(var, noise_floor_rel);
            let h = GpHyperparams::new(sv, scales.clone(), (0.1 * var).max(floor))?;
            self.gps[j].hyper = h;
        }
        self.rebuild()
    }

    /// Run `opts.steps` gradient-ascent steps on each statistic's log
    /// marginal likelihood, then refactor. A statistic whose kernel matrix
    /// degenerates keeps its previous hyperparameters.
    pub fn fit_hyperparams(&mut self, opts: &FitOptions) -> Vec<FitReport> {
        if opts.steps == 0 || self.len() < 2 {
            return Vec::new();
        }
        let start = self.len().saturating_sub(opts.max_points.max(2));
        let mut reports = Vec::with_capacity(self.stat_dim());
        for j in 0..self.stat_dim() {
            let col: Vec<f64> = self.outputs[start..].iter().map(|x| x[j]).collect();
            let report = fit::fit_stat(&self.inputs[start..], &col, &self.gps[j].hyper, opts);
            if report.aborted {
                log::warn!("hyperparameter fit for statistic {j} aborted: {}", report.message);
            } else {
                let previous = self.gps[j].hyper.clone();
                self.gps[j].hyper = report.hyper.clone();
                if self.rebuild_stat(j, 0.0).is_err() {
                    log::warn!("statistic {j}: fitted hyperparameters do not factor, reverting");
                    self.gps[j].hyper = previous;
                    let _ = self.rebuild_stat(j, 0.0);
                }
            }
            reports.push(report);
        }
        reports
    }
}
