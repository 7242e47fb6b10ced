//! Experiment manifests (TOML, versioned) and run artifacts.
//!
//! ```toml
//! version = 1
//! name = "exp-toy-asl"
//! output_dir = "runs/exp-toy-asl"   # optional; relative to the working directory
//! analytic_oracle = true            # exponential toy only
//!
//! [observed]                        # one of:
//! source = "generated"              #   generated: simulate once at `theta`
//! theta = [0.1]                     #     (simulator units) with `seed`
//! seed = 1
//! # source = "inline"; values = [9.42]
//! # source = "file"; path = "../data/blowfly_observed.csv"  (relative to the manifest)
//!
//! [predictive]                      # optional
//! draws_per_sample = 1
//! thin = 10
//!
//! [run]                             # sampler configuration
//! sampler = "asl"                   # kernel-marginal | kernel-pseudo-marginal | asl | gps
//! ...
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::oracle::{analytic_exponential_posterior, GammaPosterior};
use crate::error::{Error, Result};
use crate::rng::{RngStream, OBSERVE_STREAM};
use crate::samplers::{write_chain_csv, ChainOutput, PriorComponent, RunConfig};
use crate::simulators::SimulatorConfig;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservedSource {
    Inline { values: Vec<f64> },
    File { path: PathBuf },
    Generated { theta: Vec<f64>, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictiveSettings {
    pub draws_per_sample: usize,
    pub thin: usize,
}

impl Default for PredictiveSettings {
    fn default() -> Self {
        PredictiveSettings {
            draws_per_sample: 1,
            thin: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub analytic_oracle: bool,
    pub observed: ObservedSource,
    #[serde(default)]
    pub predictive: PredictiveSettings,
    pub run: RunConfig,
    /// Directory of the manifest file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: ExperimentManifest = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml(&text, &base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::config(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("manifest name must be a non-empty file-name-safe string"));
        }
        self.run.validate()?;
        if let ObservedSource::File { path } = &self.observed {
            let p = self.base_dir.join(path);
            if !p.is_file() {
                return Err(Error::config(format!("observed file {} does not exist", p.display())));
            }
        }
        if self.analytic_oracle && self.exp_prior().is_none() {
            return Err(Error::config("analytic_oracle needs the exponential toy with a gamma prior"));
        }
        if self.predictive.draws_per_sample == 0 {
            return Err(Error::config("predictive.draws_per_sample must be >= 1"));
        }
        Ok(())
    }

    fn exp_prior(&self) -> Option<(f64, f64, usize)> {
        match (&self.run.simulator, self.run.prior.as_slice()) {
            (SimulatorConfig::ExpToy { draws }, [PriorComponent::Gamma { shape, rate }]) => {
                Some((*shape, *rate, *draws))
            }
            _ => None,
        }
    }

    /// Resolve the observed statistics.
    pub fn observed(&self) -> Result<Vec<f64>> {
        match &self.observed {
            ObservedSource::Inline { values } => Ok(values.clone()),
            ObservedSource::File { path } => Ok(read_observed_csv(&self.base_dir.join(path))?.1),
            ObservedSource::Generated { theta, seed } => generate_observed(&self.run.simulator, theta, *seed),
        }
    }

    /// Closed-form posterior for the exponential toy, if requested.
    pub fn analytic_posterior(&self, observed: &[f64]) -> Result<Option<GammaPosterior>> {
        if !self.analytic_oracle {
            return Ok(None);
        }
        let (a, b, n) = self.exp_prior().expect("validated");
        analytic_exponential_posterior(a, b, n, observed[0]).map(Some)
    }
}

/// One simulation at `theta` (simulator units) on the observation stream.
pub fn generate_observed(sim: &SimulatorConfig, theta: &[f64], seed: u64) -> Result<Vec<f64>> {
    let s = sim.build()?;
    if theta.len() != s.spec().param_dim() {
        return Err(Error::config("observed.theta has the wrong dimension"));
    }
    let mut rng = RngStream::new(seed, OBSERVE_STREAM);
    s.simulate(theta, &mut rng)
}

/// Header row of statistic names, one row of values.
pub fn write_observed_csv(path: &Path, names: &[String], values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    w.write_record(values.iter().map(|v| v.to_string()))?;
    w.flush()?;
    Ok(())
}

pub fn read_observed_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let names: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = r.records();
    let rec = rows
        .next()
        .ok_or_else(|| Error::Parse {
            line: 2,
            message: "missing values row".into(),
        })?
        .map_err(|e| Error::Parse {
            line: 2,
            message: e.to_string(),
        })?;
    let values = rec
        .iter()
        .map(|v| {
            v.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: 2,
                message: format!("bad value {v:?}"),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != names.len() {
        return Err(Error::Parse {
            line: 2,
            message: "value count differs from header".into(),
        });
    }
    if rows.next().is_some() {
        return Err(Error::Parse {
            line: 3,
            message: "expected a single row of values".into(),
        });
    }
    Ok((names, values))
}

/// Everything about a run except the per-step chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub name: String,
    pub seed: u64,
    pub config: RunConfig,
    pub observed: Vec<f64>,
    pub burn_in: usize,
    pub chain_length: usize,
    pub samples: usize,
    pub init_calls: u64,
    pub step_calls: u64,
    pub total_calls: u64,
    pub acceptance_rate: f64,
    pub budget_breaches: usize,
    pub simulation_failures: usize,
    pub total_acquisitions: usize,
    pub wall_time_secs: f64,
    pub analytic_posterior: Option<GammaPosterior>,
}

impl RunMetadata {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Write `chain.csv`, `metadata.json`, `observed.csv` and, for GPS,
/// `surrogate.ckpt` into `dir`.
pub fn write_run_outputs(
    manifest: &ExperimentManifest,
    out: &ChainOutput,
    stat_names: &[String],
    dir: &Path,
) -> Result<RunMetadata> {
    std::fs::create_dir_all(dir)?;
    write_chain_csv(out, &dir.join("chain.csv"))?;
    write_observed_csv(&dir.join("observed.csv"), stat_names, &out.observed)?;
    if let Some(s) = &out.surrogate {
        crate::gp::save_checkpoint(s, &dir.join("surrogate.ckpt"))?;
    }
    let meta = RunMetadata {
        name: manifest.name.clone(),
        seed: manifest.run.seed,
        config: manifest.run.clone(),
        observed: out.observed.clone(),
        burn_in: out.burn_in,
        chain_length: out.steps.len(),
        samples: out.samples().len(),
        init_calls: out.init_calls,
        step_calls: out.step_calls(),
        total_calls: out.total_calls,
        acceptance_rate: out.acceptance_rate(),
        budget_breaches: out.budget_breaches(),
        simulation_failures: out.failures(),
        total_acquisitions: out.acquisitions().iter().sum(),
        wall_time_secs: out.wall_time_secs,
        analytic_posterior: manifest.analytic_posterior(&out.observed)?,
    };
    std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta)
}
