use std::path::Path;

use super::SamplerKind;
use crate::error::{Error, Result};
use crate::gp::SurrogateState;

/// One MH step as recorded in the chain file. `theta` is the state after the
/// step, in simulator units.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub accepted: bool,
    pub tau: f64,
    pub error: f64,
    pub sim_calls: u64,
    pub rounds: usize,
    pub acquisitions: usize,
    pub budget_breach: bool,
    pub failures: usize,
    pub theta: Vec<f64>,
    pub widths: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub sampler: SamplerKind,
    pub param_names: Vec<String>,
    pub observed: Vec<f64>,
    pub burn_in: usize,
    /// Simulations run before the first step.
    pub init_calls: u64,
    pub total_calls: u64,
    pub wall_time_secs: f64,
    pub steps: Vec<StepRecord>,
    pub surrogate: Option<SurrogateState>,
}

impl ChainOutput {
    /// Post-burn-in states.
    pub fn samples(&self) -> Vec<Vec<f64>> {
        self.steps[self.burn_in.min(self.steps.len())..]
            .iter()
            .map(|s| s.theta.clone())
            .collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.accepted).count() as f64 / self.steps.len() as f64
    }

    pub fn step_calls(&self) -> u64 {
        self.steps.iter().map(|s| s.sim_calls).sum()
    }

    pub fn budget_breaches(&self) -> usize {
        self.steps.iter().filter(|s| s.budget_breach).count()
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().map(|s| s.failures).sum()
    }

    pub fn acquisitions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.acquisitions).collect()
    }
}

/// Chain file contents: `step,accepted,tau,error,sim_calls,<params...>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub param_names: Vec<String>,
    pub step: Vec<usize>,
    pub accepted: Vec<bool>,
    pub tau: Vec<f64>,
    pub error: Vec<f64>,
    pub sim_calls: Vec<u64>,
    pub theta: Vec<Vec<f64>>,
}

impl ChainTable {
    pub fn len(&self) -> usize {
        self.step.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step.is_empty()
    }

    /// Rows with `step >= burn_in`.
    pub fn samples(&self, burn_in: usize) -> Vec<Vec<f64>> {
        self.step
            .iter()
            .zip(&self.theta)
            .filter(|(s, _)| **s >= burn_in)
            .map(|(_, t)| t.clone())
            .collect()
    }
}

const FIXED: [&str; 5] = ["step", "accepted", "tau", "error", "sim_calls"];

pub fn write_chain_csv(out: &ChainOutput, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend(out.param_names.iter().cloned());
    w.write_record(&header)?;
    for s in &out.steps {
        let mut rec = vec![
            s.step.to_string(),
            u8::from(s.accepted).to_string(),
            s.tau.to_string(),
            s.error.to_string(),
            s.sim_calls.to_string(),
        ];
        rec.extend(s.theta.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_chain_csv(path: &Path) -> Result<ChainTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if header.len() <= FIXED.len() || header[..FIXED.len()] != FIXED {
        return Err(Error::Parse {
            line: 1,
            message: format!("chain header must start with {}", FIXED.join(",")),
        });
    }
    let d = header.len() - FIXED.len();
    let mut t = ChainTable {
        param_names: header[FIXED.len()..].to_vec(),
        step: Vec::new(),
        accepted: Vec::new(),
        tau: Vec::new(),
        error: Vec::new(),
        sim_calls: Vec::new(),
        theta: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let bad = |what: &str, v: &str| Error::Parse {
            line,
            message: format!("bad {what} {v:?}"),
        };
        let f = |k: usize| -> Result<f64> {
            let v = &rec[k];
            v.trim().parse::<f64>().map_err(|_| bad(&header[k], v))
        };
        t.step.push(rec[0].trim().parse().map_err(|_| bad("step", &rec[0]))?);
        t.accepted.push(match rec[1].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            v => return Err(bad("accepted", v)),
        });
        t.tau.push(f(2)?);
        t.error.push(f(3)?);
        t.sim_calls.push(rec[4].trim().parse().map_err(|_| bad("sim_calls", &rec[4]))?);
        t.theta.push((0..d).map(|k| f(FIXED.len() + k)).collect::<Result<_>>()?);
    }
    Ok(t)
}
