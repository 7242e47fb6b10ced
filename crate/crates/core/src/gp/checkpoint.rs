//! Plain-text surrogate checkpoints.
//!
//! ```text
//! lfabc-gp-checkpoint 1
//! dims <D> <J> <N>
//! insertions <count>
//! hyper <j> <signal_variance> <noise_variance> <jitter> <l_1> ... <l_D>   (J lines)
//! point <theta_1> ... <theta_D> <x_1> ... <x_J>                           (N lines)
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload reproduces the
//! training set and hyperparameters exactly. Factorizations are rebuilt in
//! insertion order with the stored jitter, which repeats the same arithmetic.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{GpHyperparams, SurrogateState};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "lfabc-gp-checkpoint";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

pub fn save_checkpoint(state: &SurrogateState, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{MAGIC} {CHECKPOINT_VERSION}")?;
    writeln!(out, "dims {} {} {}", state.dim(), state.stat_dim(), state.len())?;
    writeln!(out, "insertions {}", state.insertions)?;
    for (j, gp) in state.gps.iter().enumerate() {
        let h = &gp.hyper;
        writeln!(
            out,
            "hyper {j} {:?} {:?} {:?} {}",
            h.signal_variance,
            h.noise_variance,
            gp.jitter,
            join(&h.length_scales)
        )?;
    }
    for (t, x) in state.inputs.iter().zip(&state.outputs) {
        writeln!(out, "point {} {}", join(t), join(x))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn floats(fields: &[&str], line: usize) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|e| parse_err(line, format!("{f:?}: {e}"))))
        .collect()
}

pub fn load_checkpoint(path: &Path) -> Result<SurrogateState> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()));

    let (ln, head) = it.next().ok_or_else(|| parse_err(1, "empty checkpoint"))?;
    if head.len() != 2 || head[0] != MAGIC {
        return Err(parse_err(ln, "not a surrogate checkpoint"));
    }
    if head[1] != CHECKPOINT_VERSION.to_string() {
        return Err(parse_err(ln, format!("unsupported checkpoint version {}", head[1])));
    }
    let (ln, dims) = it.next().ok_or_else(|| parse_err(2, "missing dims line"))?;
    if dims.len() != 4 || dims[0] != "dims" {
        return Err(parse_err(ln, "expected `dims D J N`"));
    }
    let parse_usize = |s: &str, ln: usize| s.parse::<usize>().map_err(|e| parse_err(ln, e.to_string()));
    let (d, j, n) = (parse_usize(dims[1], ln)?, parse_usize(dims[2], ln)?, parse_usize(dims[3], ln)?);
    let (ln, ins) = it.next().ok_or_else(|| parse_err(3, "missing insertions line"))?;
    if ins.len() != 2 || ins[0] != "insertions" {
        return Err(parse_err(ln, "expected `insertions K`"));
    }
    let insertions = parse_usize(ins[1], ln)?;

    let mut hypers = Vec::with_capacity(j);
    let mut jitters = Vec::with_capacity(j);
    for k in 0..j {
        let (ln, f) = it.next().ok_or_else(|| parse_err(0, "missing hyper line"))?;
        if f.len() != 5 + d || f[0] != "hyper" || f[1] != k.to_string() {
            return Err(parse_err(ln, format!("expected hyper line for statistic {k}")));
        }
        let v = floats(&f[2..], ln)?;
        hypers.push(GpHyperparams::new(v[0], v[3..].to_vec(), v[1]).map_err(|e| parse_err(ln, e.to_string()))?);
        jitters.push(v[2]);
    }
    let mut state = SurrogateState::with_hyperparams(d, hypers)?;
    for (gp, jit) in state.gps.iter_mut().zip(jitters) {
        gp.jitter = jit;
    }
    for _ in 0..n {
        let (ln, f) = it.next().ok_or_else(|| parse_err(0, "missing point line"))?;
        if f.len() != 1 + d + j || f[0] != "point" {
            return Err(parse_err(ln, "malformed point line"));
        }
        let v = floats(&f[1..], ln)?;
        state.inputs.push(v[..d].to_vec());
        state.outputs.push(v[d..].to_vec());
    }
    if let Some((ln, _)) = it.find(|(_, f)| !f.is_empty()) {
        return Err(parse_err(ln, "trailing content"));
    }
    for k in 0..j {
        let jitter = state.gps[k].jitter;
        state.rebuild_stat(k, jitter)?;
    }
    state.insertions = insertions;
    Ok(state)
}
