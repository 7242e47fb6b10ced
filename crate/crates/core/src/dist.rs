//! Multivariate normal densities and factorizations.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// First ridge tried, relative to the mean diagonal.
pub const RIDGE_START: f64 = 1e-9;
/// Largest ridge tried before giving up.
pub const RIDGE_MAX: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MvnParams {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl MvnParams {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::invalid(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        Ok(MvnParams { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Cholesky factor of a covariance, possibly after a diagonal ridge.
#[derive(Debug, Clone)]
pub struct MvnFactor {
    lower: DMatrix<f64>,
    log_det: f64,
    ridge: f64,
}

impl MvnFactor {
    /// Factor `cov`, adding `r * I` with `r = 1e-9 * mean(diag)` escalating by
    /// ten up to `1e-3 * mean(diag)` if the plain factorization fails.
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if cov.ncols() != n || n == 0 {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDegeneracy {
                context: "covariance has non-finite entries".into(),
                ridge: 0.0,
            });
        }
        if let Some(ch) = Cholesky::new(cov.clone()) {
            return Ok(Self::from_cholesky(ch, 0.0));
        }
        let mean_diag = cov.diagonal().iter().sum::<f64>() / n as f64;
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        let mut rel = RIDGE_START;
        let mut ridge = rel * scale;
        while rel <= RIDGE_MAX * (1.0 + 1e-12) {
            ridge = rel * scale;
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += ridge;
            }
            if let Some(ch) = Cholesky::new(m) {
                return Ok(Self::from_cholesky(ch, ridge));
            }
            rel *= 10.0;
        }
        Err(Error::NumericalDegeneracy {
            context: "covariance factorization".into(),
            ridge,
        })
    }

    fn from_cholesky(ch: Cholesky<f64, Dyn>, ridge: f64) -> Self {
        let lower = ch.unpack();
        let log_det = 2.0 * lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        MvnFactor {
            lower,
            log_det,
            ridge,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Log density of `x` under N(mean, LL^T).
    pub fn logpdf(&self, x: &[f64], mean: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(mean.len(), n);
        // forward substitution L z = x - mean
        let mut quad = 0.0;
        let mut z = [0.0f64; 8];
        let mut heap;
        let z: &mut [f64] = if n <= 8 {
            &mut z[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for i in 0..n {
            let mut s = x[i] - mean[i];
            for k in 0..i {
                s -= self.lower[(i, k)] * z[k];
            }
            z[i] = s / self.lower[(i, i)];
            quad += z[i] * z[i];
        }
        -0.5 * (n as f64 * LN_2PI + self.log_det + quad)
    }
}

/// Log density of the multivariate normal, evaluated through a Cholesky
/// factor with the ridge policy of [`MvnFactor::new`].
pub fn mvn_logpdf(x: &[f64], p: &MvnParams) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::invalid(format!(
            "point has length {} but distribution has dimension {}",
            x.len(),
            p.dim()
        )));
    }
    Ok(MvnFactor::new(&p.cov)?.logpdf(x, &p.mean))
}

/// Univariate normal log density.
pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Lower-triangular `L` with `LL^T = cov` for a positive semi-definite
/// matrix. Pivots at or below `1e-14 * max(diag)` are treated as exact zeros,
/// so rank-deficient covariances factor without a ridge.
pub fn psd_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::invalid("covariance must be square"));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalDegeneracy {
            context: "covariance has non-finite entries".into(),
            ridge: 0.0,
        });
    }
    let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);
    let tol = 1e-14 * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            if d < -1e-8 * max_diag.max(f64::MIN_POSITIVE) {
                return Err(Error::NumericalDegeneracy {
                    context: "covariance is not positive semi-definite".into(),
                    ridge: 0.0,
                });
            }
            continue;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// One draw `mean + L z` given a lower factor of the covariance.
pub fn sample_with_factor(mean: &[f64], lower: &DMatrix<f64>, rng: &mut RngStream) -> Vec<f64> {
    let n = mean.len();
    let z: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    (0..n)
        .map(|i| mean[i] + (0..=i).map(|k| lower[(i, k)] * z[k]).sum::<f64>())
        .collect()
}

pub fn sample_mvn(p: &MvnParams, rng: &mut RngStream) -> Result<Vec<f64>> {
    let l = psd_factor(&p.cov)?;
    Ok(sample_with_factor(&p.mean, &l, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_inverse_logpdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
        let n = x.len();
        let inv = cov.clone().try_inverse().unwrap();
        let det = cov.determinant();
        let d = nalgebra::DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
        let q = (d.transpose() * inv * &d)[(0, 0)];
        -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + q)
    }

    fn random_spd(rng: &mut RngStream, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
        &a * a.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn standard_bivariate_at_mode() {
        let p = MvnParams::new(vec![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let v = mvn_logpdf(&[0.0, 0.0], &p).unwrap();
        assert!((v - (1.0 / (2.0 * std::f64::consts::PI)).ln()).abs() < 1e-12);
        assert!((v + 1.837877).abs() < 1e-6);
    }

    #[test]
    fn univariate_standard_at_one() {
        let p = MvnParams::new(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        let v = mvn_logpdf(&[1.0], &p).unwrap();
        assert!((v + 1.418939).abs() < 1e-6);
    }

    #[test]
    fn matches_dense_inverse() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..50 {
            let cov = random_spd(&mut rng, 3);
            let mean: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal() * 2.0).collect();
            let p = MvnParams::new(mean.clone(), cov.clone()).unwrap();
            let a = mvn_logpdf(&x, &p).unwrap();
            let b = dense_inverse_logpdf(&x, &mean, &cov);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn ridge_rescues_singular() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = MvnFactor::new(&cov).unwrap();
        assert!(f.ridge() > 0.0 && f.ridge() <= 1e-3);
    }

    #[test]
    fn ridge_gives_up() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        match MvnFactor::new(&cov) {
            Err(Error::NumericalDegeneracy { ridge, .. }) => assert!((ridge - 1e-3).abs() < 1e-12),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = MvnParams::new(vec![0.0], DMatrix::identity(1, 1)).unwrap();
        assert!(mvn_logpdf(&[0.0, 1.0], &p).is_err());
    }

    #[test]
    fn psd_factor_rank_one() {
        let cov = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 1.0]);
        let l = psd_factor(&cov).unwrap();
        let back = &l * l.transpose();
        assert!((back - cov).abs().max() < 1e-12);
        assert_eq!(l[(1, 1)], 0.0);
    }

    #[test]
    fn zero_covariance_sample_is_mean() {
        let p = MvnParams::new(vec![1.5, -2.0], DMatrix::zeros(2, 2)).unwrap();
        let mut rng = RngStream::new(1, 0);
        assert_eq!(sample_mvn(&p, &mut rng).unwrap(), vec![1.5, -2.0]);
    }

    proptest! {
        #[test]
        fn permutation_invariance(seed in 0u64..10_000, perm_idx in 0usize..6) {
            let perms = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let perm = perms[perm_idx];
            let mut rng = RngStream::new(seed, 0);
            let cov = random_spd(&mut rng, 3);
            let mean: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.standard_normal()).collect();
            let a = mvn_logpdf(&x, &MvnParams::new(mean.clone(), cov.clone()).unwrap()).unwrap();
            let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
            let pm: Vec<f64> = perm.iter().map(|&i| mean[i]).collect();
            let pc = DMatrix::from_fn(3, 3, |i, j| cov[(perm[i], perm[j])]);
            let b = mvn_logpdf(&px, &MvnParams::new(pm, pc).unwrap()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
