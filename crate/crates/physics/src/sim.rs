//! Time-domain verification with piecewise-constant slices of the full
//! rotating-frame Hamiltonian.
//!
//! Both drive Hamiltonians are block structured: H_SQ is a sum of commuting
//! single-nucleus terms (identity on the electron), and H_NV is block
//! diagonal over nuclear levels. Each slice exponential is therefore
//! computed exactly as a Kronecker product of 2×2 exponentials (radio) or a
//! direct sum of 2×2 exponentials (microwave); `propagate_dense` does the
//! same with dense eigendecompositions and serves as the cross-check.

use std::io::Write;

use nvq_core::matcore::{expm_hermitian, identity, kron, partial_trace_electron, C64, CMat, ZERO};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hardware::{h_nv, h_sq, DriveField, SpinSystem};
use crate::pulse::{PulseSchedule, Regime};
use crate::quat::Quat;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    /// Sub-steps per τ for microwave slices (the 2ω_el counter-rotating
    /// term is not resolved at 1 ns). `None` picks a count automatically.
    pub microwave_substeps: Option<usize>,
    pub reunitarize_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { microwave_substeps: None, reunitarize_every: 10_000 }
    }
}

/// Keeps the fastest microwave phase advance per sub-step below 0.25 rad.
pub fn auto_substeps(sys: &SpinSystem, tau: f64) -> usize {
    let wmax = sys.level_frequencies().iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let fast = 2.0 * sys.omega_el().abs() + wmax;
    ((fast * tau / 0.25).ceil() as usize).max(1)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PropagationStats {
    pub steps: usize,
    /// Largest deviation from unit norm seen before a re-normalization.
    pub unitarity_drift: f64,
}

fn renorm(qs: &mut [Quat], stats: &mut PropagationStats) {
    for q in qs.iter_mut() {
        stats.unitarity_drift = stats.unitarity_drift.max((q.norm() - 1.0).abs());
        *q = q.normalized();
    }
}

/// Per-nucleus step exponentials of H_SQ for step `k`.
fn radio_step(sys: &SpinSystem, field: &DriveField, k: usize) -> Vec<Quat> {
    let s = (k as f64 + 0.5) * field.tau;
    let t = field.t0 + s;
    let b1 = field.envelope[k] * (field.carrier * t + field.phase).cos();
    (0..sys.n())
        .map(|i| {
            let (sn, cs) = (sys.nuclear_frequency(i) * t).sin_cos();
            let a = sys.nuclei[i].gamma * b1 * field.tau / 2.0;
            Quat::exp([a * cs, a * sn, 0.0])
        })
        .collect()
}

/// Per-level step exponentials of H_NV for step `k` with `nsub` sub-steps.
fn microwave_step(sys: &SpinSystem, field: &DriveField, k: usize, nsub: usize, freqs: &[f64]) -> Vec<Quat> {
    let dt = field.tau / nsub as f64;
    let kappa = sys.drive_coupling();
    let wel = sys.omega_el();
    let env = field.envelope[k];
    let mut q = vec![Quat::ONE; freqs.len()];
    if env == 0.0 {
        return q;
    }
    for m in 0..nsub {
        let t = field.t0 + k as f64 * field.tau + (m as f64 + 0.5) * dt;
        let a = kappa * env * (field.carrier * t + field.phase).cos() * dt;
        for (ql, w) in q.iter_mut().zip(freqs) {
            let (sn, cs) = ((wel + w) * t).sin_cos();
            // exp(−i a (cos θ σx − sin θ σy))
            *ql = Quat::exp([-a * cs, a * sn, 0.0]) * *ql;
        }
    }
    q
}

fn accumulate(
    steps: usize,
    mut step: impl FnMut(usize) -> Vec<Quat>,
    width: usize,
    every: usize,
    stats: &mut PropagationStats,
) -> Vec<Quat> {
    let mut acc = vec![Quat::ONE; width];
    for k in 0..steps {
        let s = step(k);
        for (a, q) in acc.iter_mut().zip(s) {
            *a = q * *a;
        }
        if every > 0 && (k + 1) % every == 0 {
            renorm(&mut acc, stats);
        }
    }
    stats.steps += steps;
    acc
}

/// Per-nucleus propagators of a radio pulse.
pub fn radio_nuclei(sys: &SpinSystem, field: &DriveField) -> Vec<Quat> {
    let mut st = PropagationStats::default();
    accumulate(field.steps(), |k| radio_step(sys, field, k), sys.n(), 10_000, &mut st)
}

/// Per-level electron propagators of a microwave pulse under the full H_NV.
pub fn microwave_levels(sys: &SpinSystem, field: &DriveField, substeps: Option<usize>) -> Vec<Quat> {
    let nsub = substeps.unwrap_or_else(|| auto_substeps(sys, field.tau));
    let freqs = sys.level_frequencies();
    let mut st = PropagationStats::default();
    accumulate(field.steps(), |k| microwave_step(sys, field, k, nsub, &freqs), freqs.len(), 10_000, &mut st)
}

/// Fidelity of per-level propagators against target phases, and the
/// largest |↑⟩ population left behind from a |↓ l⟩ input.
pub fn level_fidelity(levels: &[Quat], phases: &[f64]) -> (f64, f64) {
    let s: C64 = levels
        .iter()
        .zip(phases)
        .map(|(q, p)| C64::from_polar(1.0, -p) * C64::new(q.w, q.v[2]))
        .sum();
    let ret = levels.iter().map(|q| q.v[0] * q.v[0] + q.v[1] * q.v[1]).fold(0.0, f64::max);
    (s.norm() / levels.len() as f64, ret)
}

fn radio_matrix(qs: &[Quat]) -> CMat {
    let nuc = qs.iter().fold(identity(1), |acc, q| kron(&acc, &q.matrix()));
    kron(&identity(2), &nuc)
}

fn levels_matrix(qs: &[Quat]) -> CMat {
    let d = qs.len();
    let mut m = CMat::zeros(2 * d, 2 * d);
    for (l, q) in qs.iter().enumerate() {
        let u = q.matrix();
        for e in 0..2 {
            for f in 0..2 {
                m[(e * d + l, f * d + l)] = u[(e, f)];
            }
        }
    }
    m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Propagation {
    pub tau: f64,
    pub schedule: Vec<PulseSchedule>,
    pub system: SpinSystem,
    #[serde(default)]
    pub initial_state: Option<usize>,
}

impl Propagation {
    pub fn new(system: SpinSystem, schedule: Vec<PulseSchedule>, tau: f64) -> Self {
        Propagation { tau, schedule, system, initial_state: None }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return invalid("τ must be positive");
        }
        self.system.validate()?;
        for s in &self.schedule {
            if (s.field.tau - self.tau).abs() > 1e-18 && s.field.steps() > 0 {
                return invalid("pulse sampled at a different τ than the propagation");
            }
            if let Regime::Radio { nucleus } = s.regime {
                if nucleus >= self.system.n() {
                    return invalid(format!("radio pulse on missing nucleus {nucleus}"));
                }
            }
        }
        Ok(())
    }

    /// Fields placed back to back starting at t = 0.
    pub fn timed_fields(&self) -> Vec<DriveField> {
        let mut t = 0.0;
        self.schedule
            .iter()
            .map(|s| {
                let f = s.field.shifted_to(t);
                t += f.duration();
                f
            })
            .collect()
    }

    pub fn total_duration(&self) -> f64 {
        self.schedule.iter().map(|s| s.duration()).sum()
    }

    pub fn total_steps(&self) -> usize {
        self.schedule.iter().map(|s| s.field.steps()).sum()
    }
}

/// Full 2^{N+1} propagator of the schedule.
pub fn propagate(p: &Propagation) -> Result<CMat> {
    Ok(propagate_with(p, &SimOptions::default())?.0)
}

pub fn propagate_with(p: &Propagation, opts: &SimOptions) -> Result<(CMat, PropagationStats)> {
    p.validate()?;
    let sys = &p.system;
    let nsub = opts.microwave_substeps.unwrap_or_else(|| auto_substeps(sys, p.tau));
    let freqs = sys.level_frequencies();
    let mut stats = PropagationStats::default();
    let mut u = identity(sys.dim());
    for (s, field) in p.schedule.iter().zip(p.timed_fields()) {
        if field.steps() == 0 {
            continue;
        }
        let g = match s.regime {
            Regime::Radio { .. } => radio_matrix(&accumulate(
                field.steps(),
                |k| radio_step(sys, &field, k),
                sys.n(),
                opts.reunitarize_every,
                &mut stats,
            )),
            Regime::Microwave => levels_matrix(&accumulate(
                field.steps(),
                |k| microwave_step(sys, &field, k, nsub, &freqs),
                freqs.len(),
                opts.reunitarize_every,
                &mut stats,
            )),
        };
        u = g * u;
    }
    Ok((u, stats))
}

/// Reference propagation through dense Hermitian slices (slow; for checks).
pub fn propagate_dense(p: &Propagation, opts: &SimOptions) -> Result<CMat> {
    p.validate()?;
    let sys = &p.system;
    let nsub = opts.microwave_substeps.unwrap_or_else(|| auto_substeps(sys, p.tau));
    let mut u = identity(sys.dim());
    for (s, field) in p.schedule.iter().zip(p.timed_fields()) {
        for k in 0..field.steps() {
            let (n, f): (usize, &dyn Fn(f64) -> Result<CMat>) = match s.regime {
                Regime::Radio { .. } => (1, &|t| h_sq(sys, t, &field)),
                Regime::Microwave => (nsub, &|t| h_nv(sys, t, &field)),
            };
            let dt = p.tau / n as f64;
            for m in 0..n {
                let h = f(k as f64 * p.tau + (m as f64 + 0.5) * dt)?;
                if !nvq_core::matcore::is_hermitian(&h, 1e-9 * h.norm().max(1.0)) {
                    return Err(Error::Internal("non-Hermitian slice".into()));
                }
                u = expm_hermitian(&h, dt) * u;
            }
        }
    }
    Ok(u)
}

/// ⟨↓|U_f|↓⟩.
pub fn reduced_propagator(u_full: &CMat) -> Result<CMat> {
    Ok(partial_trace_electron(u_full)?)
}

/// |Tr(U_r† U_p)| / 2^N.
pub fn fidelity(u_r: &CMat, u_p: &CMat) -> f64 {
    let t: C64 = u_r.iter().zip(u_p.iter()).map(|(a, b)| a.conj() * b).sum();
    t.norm() / u_p.nrows() as f64
}

/// Complex matrix as rows of [re, im] pairs.
pub fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return invalid("matrix must be square");
    }
    Ok(CMat::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    #[serde(with = "rows")]
    pub reduced: CMat,
    #[serde(with = "rows")]
    pub target: CMat,
    /// 1 − min over columns of the ↓-projected column norm².
    pub leakage: f64,
}

mod rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let r: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        matrix_from_rows(&r).map_err(serde::de::Error::custom)
    }
}

pub fn fidelity_report(u_full: &CMat, target: &CMat) -> Result<FidelityReport> {
    let ur = reduced_propagator(u_full)?;
    if ur.shape() != target.shape() {
        return invalid(format!("target is {:?}, reduced propagator {:?}", target.shape(), ur.shape()));
    }
    let min_col = (0..ur.ncols())
        .map(|c| ur.column(c).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(FidelityReport { fidelity: fidelity(&ur, target), reduced: ur, target: target.clone(), leakage: 1.0 - min_col })
}

/// Basis labels |e s₁…s_N⟩ with e ∈ {↓, ↑}.
pub fn basis_labels(n: usize) -> Vec<String> {
    (0..2usize << n)
        .map(|i| {
            let e = if i >> n == 0 { '↓' } else { '↑' };
            let bits: String = (0..n).map(|j| if (i >> (n - 1 - j)) & 1 == 1 { '1' } else { '0' }).collect();
            format!("|{e}{bits}⟩")
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn last(&self) -> &[f64] {
        self.populations.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut c = csv::Writer::from_writer(w);
        let mut head = vec!["t_ns".to_string()];
        head.extend(self.labels.iter().cloned());
        c.write_record(&head).map_err(|e| Error::Internal(e.to_string()))?;
        for (t, p) in self.times.iter().zip(&self.populations) {
            let mut row = vec![format!("{:.17e}", t * 1e9)];
            row.extend(p.iter().map(|x| format!("{x:.17e}")));
            c.write_record(&row).map_err(|e| Error::Internal(e.to_string()))?;
        }
        c.flush()?;
        Ok(())
    }
}

fn apply_pair(psi: &mut [C64], i: usize, j: usize, q: &Quat) {
    let (a, b) = (psi[i], psi[j]);
    let (u00, u01) = (C64::new(q.w, q.v[2]), C64::new(q.v[1], q.v[0]));
    let (u10, u11) = (C64::new(-q.v[1], q.v[0]), C64::new(q.w, -q.v[2]));
    psi[i] = u00 * a + u01 * b;
    psi[j] = u10 * a + u11 * b;
}

/// Populations of all 2^{N+1} basis states after every `stride` steps,
/// starting from |↓, initial⟩ at t = 0.
pub fn population_trace(p: &Propagation, initial: usize, stride: usize) -> Result<Trace> {
    p.validate()?;
    let sys = &p.system;
    let d = sys.levels();
    if initial >= d {
        return invalid(format!("initial level {initial} out of range"));
    }
    let stride = stride.max(1);
    let nsub = auto_substeps(sys, p.tau);
    let freqs = sys.level_frequencies();
    let mut psi = vec![ZERO; 2 * d];
    psi[initial] = C64::new(1.0, 0.0);
    let pops = |psi: &[C64]| psi.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
    let mut tr = Trace { labels: basis_labels(sys.n()), times: vec![0.0], populations: vec![pops(&psi)] };
    let mut t = 0.0;
    let mut count = 0usize;
    let n = sys.n();
    for (s, field) in p.schedule.iter().zip(p.timed_fields()) {
        for k in 0..field.steps() {
            match s.regime {
                Regime::Radio { .. } => {
                    for (j, q) in radio_step(sys, &field, k).iter().enumerate() {
                        let bit = 1usize << (n - 1 - j);
                        for i in 0..2 * d {
                            if i & bit == 0 {
                                apply_pair(&mut psi, i, i | bit, q);
                            }
                        }
                    }
                }
                Regime::Microwave => {
                    for (l, q) in microwave_step(sys, &field, k, nsub, &freqs).iter().enumerate() {
                        apply_pair(&mut psi, l, d + l, q);
                    }
                }
            }
            t += p.tau;
            count += 1;
            if count % stride == 0 {
                tr.times.push(t);
                tr.populations.push(pops(&psi));
            }
        }
    }
    if count % stride != 0 {
        tr.times.push(t);
        tr.populations.push(pops(&psi));
    }
    Ok(tr)
}

pub use crate::pipeline::tn_sweep;
