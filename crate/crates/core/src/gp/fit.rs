//! Type-II maximum likelihood for the SE-ARD hyperparameters.

use nalgebra::{DMatrix, DVector};

use super::GpHyperparams;
use crate::dist::LN_2PI;
use crate::error::{Error, Result};

const LOG_BOUND: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub steps: usize,
    /// Only the most recent `max_points` training points enter the objective.
    pub max_points: usize,
    /// Noise variance is kept at or above this fraction of the output variance.
    pub noise_floor_rel: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            steps: 20,
            max_points: 256,
            noise_floor_rel: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub hyper: GpHyperparams,
    pub initial_lml: f64,
    pub final_lml: f64,
    pub steps_taken: usize,
    pub aborted: bool,
    pub message: String,
}

/// Gradient of the log marginal likelihood with respect to
/// `(log sv, log l_1..log l_D, log noise)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGradient {
    pub lml: f64,
    pub grad: Vec<f64>,
}

pub(crate) fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

pub(crate) fn noise_floor(var: f64, rel: f64) -> f64 {
    rel * if var > 0.0 { var } else { 1.0 }
}

fn pack(h: &GpHyperparams) -> Vec<f64> {
    let mut p = Vec::with_capacity(h.length_scales.len() + 2);
    p.push(h.signal_variance.ln());
    p.extend(h.length_scales.iter().map(|l| l.ln()));
    p.push(h.noise_variance.ln());
    p
}

fn unpack(p: &[f64]) -> GpHyperparams {
    let d = p.len() - 2;
    GpHyperparams {
        signal_variance: p[0].exp(),
        length_scales: p[1..=d].iter().map(|v| v.exp()).collect(),
        noise_variance: p[d + 1].exp(),
    }
}

struct Factored {
    kf: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    lml: f64,
}

fn factor(x: &[Vec<f64>], y: &[f64], h: &GpHyperparams) -> Result<Factored> {
    let n = x.len();
    if n != y.len() || n == 0 {
        return Err(Error::invalid("inputs and outputs must be non-empty and of equal length"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - mean));
    let kf = DMatrix::from_fn(n, n, |i, k| h.kernel(&x[i], &x[k]));
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += h.noise_variance;
    }
    let chol = k.cholesky().ok_or_else(|| Error::NumericalDegeneracy {
        context: "kernel matrix in marginal likelihood".into(),
        ridge: 0.0,
    })?;
    let alpha = chol.solve(&yc);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lml = -0.5 * yc.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;
    if !lml.is_finite() {
        return Err(Error::NumericalDegeneracy {
            context: "non-finite marginal likelihood".into(),
            ridge: 0.0,
        });
    }
    Ok(Factored { kf, chol, alpha, lml })
}

fn gradient(x: &[Vec<f64>], h: &GpHyperparams, f: &Factored) -> Result<Vec<f64>> {
    let n = x.len();
    let d = h.length_scales.len();
    let w = &f.alpha * f.alpha.transpose() - f.chol.inverse();
    let mut grad = vec![0.0; d + 2];
    for i in 0..n {
        for k2 in 0..n {
            let wk = w[(i, k2)] * f.kf[(i, k2)];
            grad[0] += wk;
            for (dd, l) in h.length_scales.iter().enumerate() {
                let r = (x[i][dd] - x[k2][dd]) / l;
                grad[1 + dd] += wk * r * r;
            }
        }
        grad[d + 1] += w[(i, i)] * h.noise_variance;
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NumericalDegeneracy {
            context: "non-finite marginal likelihood gradient".into(),
            ridge: 0.0,
        });
    }
    Ok(grad)
}

/// Log marginal likelihood of outputs `y` (centred on their mean) at inputs
/// `x`, with its gradient in log-parameter space.
pub fn log_marginal_likelihood(x: &[Vec<f64>], y: &[f64], h: &GpHyperparams) -> Result<HyperGradient> {
    let f = factor(x, y, h)?;
    Ok(HyperGradient {
        lml: f.lml,
        grad: gradient(x, h, &f)?,
    })
}

/// Gradient ascent from `start` with backtracking. Each accepted step does
/// not decrease the objective.
pub(crate) fn fit_stat(x: &[Vec<f64>], y: &[f64], start: &GpHyperparams, opts: &FitOptions) -> FitReport {
    let floor = noise_floor(variance(y), opts.noise_floor_rel).ln();
    let project = |p: &mut Vec<f64>| {
        for v in p.iter_mut() {
            *v = v.clamp(-LOG_BOUND, LOG_BOUND);
        }
        let last = p.len() - 1;
        if p[last] < floor {
            p[last] = floor;
        }
    };
    let mut p = pack(start);
    project(&mut p);
    let abort = |msg: String, lml: f64| FitReport {
        hyper: start.clone(),
        initial_lml: lml,
        final_lml: lml,
        steps_taken: 0,
        aborted: true,
        message: msg,
    };
    let mut cur = match log_marginal_likelihood(x, y, &unpack(&p)) {
        Ok(g) => g,
        Err(e) => return abort(e.to_string(), f64::NAN),
    };
    let initial_lml = cur.lml;
    // Per-coordinate step sizes in log space, adapted by the sign agreement of
    // successive gradients; a candidate is only taken if it does not lower the
    // objective.
    let mut eta = vec![0.1f64; p.len()];
    let mut prev_sign = vec![0.0f64; p.len()];
    let mut taken = 0;
    for _ in 0..opts.steps {
        if cur.grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let sign: Vec<f64> = cur.grad.iter().map(|g| if *g == 0.0 { 0.0 } else { g.signum() }).collect();
        for k in 0..p.len() {
            if sign[k] * prev_sign[k] > 0.0 {
                eta[k] = (eta[k] * 1.2).min(1.0);
            } else if sign[k] * prev_sign[k] < 0.0 {
                eta[k] *= 0.5;
            }
        }
        let mut moved = false;
        for _ in 0..30 {
            let mut cand: Vec<f64> = p.iter().zip(&sign).zip(&eta).map(|((v, s), e)| v + s * e).collect();
            project(&mut cand);
            let h = unpack(&cand);
            let next = factor(x, y, &h).and_then(|f| {
                if f.lml >= cur.lml {
                    gradient(x, &h, &f).map(|grad| Some(HyperGradient { lml: f.lml, grad }))
                } else {
                    Ok(None)
                }
            });
            match next {
                Ok(Some(next)) => {
                    p = cand;
                    cur = next;
                    moved = true;
                    break;
                }
                _ => eta.iter_mut().for_each(|e| *e *= 0.5),
            }
        }
        if !moved {
            break;
        }
        prev_sign = sign;
        taken += 1;
    }
    FitReport {
        hyper: unpack(&p),
        initial_lml,
        final_lml: cur.lml,
        steps_taken: taken,
        aborted: false,
        message: String::new(),
    }
}

#[cfg(test)]
pub(crate) mod tests_support {
    pub fn unpack(p: &[f64]) -> super::GpHyperparams {
        super::unpack(p)
    }
}
