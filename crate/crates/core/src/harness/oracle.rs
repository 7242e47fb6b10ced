use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPosterior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPosterior {
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn std(&self) -> f64 {
        self.shape.sqrt() / self.rate
    }
}

/// Conjugate posterior of an exponential rate under a `Gamma(alpha, beta)`
/// prior after `n` observations with mean `y_bar`.
pub fn analytic_exponential_posterior(alpha: f64, beta: f64, n: usize, y_bar: f64) -> Result<GammaPosterior> {
    if !(alpha > 0.0 && beta > 0.0) || !(y_bar > 0.0 || n == 0) {
        return Err(Error::invalid("prior parameters and y_bar must be positive"));
    }
    Ok(GammaPosterior {
        shape: alpha + n as f64,
        rate: beta + n as f64 * y_bar,
    })
}
