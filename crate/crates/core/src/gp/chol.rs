use crate::error::{Error, Result};

/// Dot product with independent partial sums so the loop can vectorise.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Lower Cholesky factor stored by rows that can grow one row at a time.
#[derive(Debug, Clone, Default)]
pub(crate) struct GrowingCholesky {
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Append the row for a new point with cross-covariances `k` against the
    /// existing points and self-covariance `k_self` (noise included).
    pub fn push(&mut self, k: &[f64], k_self: f64) -> Result<()> {
        debug_assert_eq!(k.len(), self.len());
        let l = self.forward(k);
        let d2 = k_self - dot(&l, &l);
        if !(d2 > 0.0) || !d2.is_finite() {
            return Err(Error::NumericalDegeneracy {
                context: format!("kernel matrix row {} has pivot {d2:e}", self.len()),
                ridge: 0.0,
            });
        }
        let mut row = l;
        row.push(d2.sqrt());
        self.rows.push(row);
        Ok(())
    }

    /// Solve `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s = dot(&row[..i], &z);
            z.push((b[i] - s) / row[i]);
        }
        z
    }

    /// Forward solves for two right-hand sides in one pass over the factor.
    pub fn forward_pair(&self, b1: &[f64], b2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut z1 = Vec::with_capacity(n);
        let mut z2 = Vec::with_capacity(n);
        for (i, row) in self.rows.iter().enumerate() {
            let s1 = dot(&row[..i], &z1);
            let s2 = dot(&row[..i], &z2);
            z1.push((b1[i] - s1) / row[i]);
            z2.push((b2[i] - s2) / row[i]);
        }
        (z1, z2)
    }

    /// Extend a forward solution `z = L^-1 b` by the entry for the last row.
    pub fn extend_forward(&self, z: &mut Vec<f64>, b_last: f64) {
        let i = z.len();
        debug_assert_eq!(i + 1, self.len());
        let row = &self.rows[i];
        z.push((b_last - dot(&row[..i], z)) / row[i]);
    }

    /// Solve `L^T x = z`.
    #[cfg(test)]
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        for i in (0..self.len()).rev() {
            let row = &self.rows[i];
            x[i] /= row[i];
            let xi = x[i];
            for (k, lik) in row[..i].iter().enumerate() {
                x[k] -= lik * xi;
            }
        }
        x
    }

    #[cfg(test)]
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    #[cfg(test)]
    pub fn log_det(&self) -> f64 {
        2.0 * self.rows.iter().enumerate().map(|(i, r)| r[i].ln()).sum::<f64>()
    }
}
