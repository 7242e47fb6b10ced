use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::samplers::ChainTable;

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub samples: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Per dimension, at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<[f64; 5]>,
    pub ess: Vec<f64>,
    pub acceptance_rate: f64,
    /// Sum of the per-step call column over the whole chain.
    pub step_calls: u64,
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Batch-means effective sample size with `floor(sqrt(n))`-sized batches,
/// capped at `n`. A zero-variance chain has ESS 1.
pub fn batch_means_ess(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    let (_, var) = mean_var(v);
    if var == 0.0 {
        return 1.0;
    }
    let b = (n as f64).sqrt().floor() as usize;
    let a = n / b;
    if a < 2 {
        return n as f64;
    }
    let means: Vec<f64> = (0..a).map(|i| v[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    let (_, bvar) = mean_var(&means);
    if bvar == 0.0 {
        return n as f64;
    }
    (n as f64 * var / (b as f64 * bvar)).min(n as f64)
}

pub fn summarize(table: &ChainTable, burn_in: usize) -> Result<PosteriorSummary> {
    let samples = table.samples(burn_in);
    if samples.is_empty() {
        return Err(Error::invalid("no samples after burn-in"));
    }
    let d = table.param_names.len();
    let mut s = PosteriorSummary {
        names: table.param_names.clone(),
        samples: samples.len(),
        mean: Vec::with_capacity(d),
        std: Vec::with_capacity(d),
        quantiles: Vec::with_capacity(d),
        ess: Vec::with_capacity(d),
        acceptance_rate: table.accepted.iter().filter(|a| **a).count() as f64 / table.len() as f64,
        step_calls: table.sim_calls.iter().sum(),
    };
    for k in 0..d {
        let col: Vec<f64> = samples.iter().map(|r| r[k]).collect();
        let (m, v) = mean_var(&col);
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        s.mean.push(m);
        s.std.push(v.sqrt());
        s.quantiles.push(QUANTILE_LEVELS.map(|q| quantile(&sorted, q)));
        s.ess.push(batch_means_ess(&col));
    }
    Ok(s)
}

fn histogram(v: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![(lo, hi, v.len())];
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in v {
        counts[(((x - lo) / w) as usize).min(bins - 1)] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * w, if i + 1 == bins { hi } else { lo + (i + 1) as f64 * w }, c))
        .collect()
}

/// Writes `summary.json`, `hist_<name>.csv` per dimension and
/// `scatter_<a>_<b>.csv` per pair (at most `max_scatter` evenly spaced rows).
pub fn write_summary_files(
    summary: &PosteriorSummary,
    samples: &[Vec<f64>],
    dir: &Path,
    bins: usize,
    max_scatter: usize,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)? + "\n")?;
    let names = &summary.names;
    for (k, name) in names.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|r| r[k]).collect();
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("hist_{name}.csv")))?);
        writeln!(f, "bin_lo,bin_hi,count")?;
        for (a, b, c) in histogram(&col, bins.max(1)) {
            writeln!(f, "{a},{b},{c}")?;
        }
    }
    let stride = samples.len().div_ceil(max_scatter.max(1)).max(1);
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            let mut f = std::io::BufWriter::new(std::fs::File::create(
                dir.join(format!("scatter_{}_{}.csv", names[a], names[b])),
            )?);
            writeln!(f, "{},{}", names[a], names[b])?;
            for r in samples.iter().step_by(stride) {
                writeln!(f, "{},{}", r[a], r[b])?;
            }
        }
    }
    Ok(())
}
