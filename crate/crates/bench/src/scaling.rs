//! Native-gate count of random CNOT circuits versus circuit depth.

use std::io::Write;

use nvq_core::{recursive_decompose, CompileOptions, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_unitary, random_cnot_circuit};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub n_cnot: usize,
    pub trials: usize,
    /// Native gates after peephole merging (before x/y lowering).
    pub mean_length: f64,
    pub min_length: usize,
    pub max_length: usize,
    /// Three native gates per CNOT.
    pub naive_length: usize,
    pub worst_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub ns: Vec<usize>,
    pub n_cnots: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub compile: CompileOptions,
}

impl Default for ScalingStudy {
    fn default() -> Self {
        ScalingStudy {
            ns: (2..=5).collect(),
            n_cnots: vec![5, 10, 20, 40],
            trials: 10,
            seed: 1,
            compile: CompileOptions { heuristics: false, ..Default::default() },
        }
    }
}

fn trial_seed(seed: u64, n: usize, n_cnot: usize, trial: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ ((n as u64) << 48)
        ^ ((n_cnot as u64) << 24)
        ^ trial as u64
}

/// Rows sorted by (n, n_cnot); trials run in parallel.
pub fn scaling_study(s: &ScalingStudy) -> Result<Vec<ScalingRow>> {
    let jobs: Vec<(usize, usize, usize)> = s
        .ns
        .iter()
        .flat_map(|&n| s.n_cnots.iter().flat_map(move |&k| (0..s.trials).map(move |t| (n, k, t))))
        .collect();
    let done: Vec<(usize, f64)> = jobs
        .par_iter()
        .map(|&(n, k, t)| {
            let c = random_cnot_circuit(n, k, trial_seed(s.seed, n, k, t))?;
            let out = recursive_decompose(&build_unitary(&c)?, &s.compile)?;
            Ok((out.gate_count(), out.residual))
        })
        .collect::<Result<_>>()?;
    let mut rows = vec![];
    for (chunk, w) in done.chunks(s.trials.max(1)).zip(jobs.chunks(s.trials.max(1))) {
        let lens: Vec<usize> = chunk.iter().map(|x| x.0).collect();
        let (n, k, _) = w[0];
        rows.push(ScalingRow {
            n,
            n_cnot: k,
            trials: lens.len(),
            mean_length: lens.iter().sum::<usize>() as f64 / lens.len() as f64,
            min_length: lens.iter().copied().min().unwrap_or(0),
            max_length: lens.iter().copied().max().unwrap_or(0),
            naive_length: 3 * k,
            worst_residual: chunk.iter().map(|x| x.1).fold(0.0, f64::max),
        });
    }
    Ok(rows)
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], w: W) -> std::io::Result<()> {
    let mut c = csv::Writer::from_writer(w);
    for r in rows {
        c.serialize(r).map_err(std::io::Error::other)?;
    }
    c.flush()
}

/// max/min of the mean length over n_cnot, per n.
pub fn flatness(rows: &[ScalingRow]) -> Vec<(usize, f64)> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let m: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.mean_length).collect();
            let hi = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
            (n, if lo > 0.0 { hi / lo } else { f64::INFINITY })
        })
        .collect()
}
