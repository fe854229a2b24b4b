//! Gate sequence → pulse schedule → simulated circuit fidelity.

use nvq_core::compile::xyx_coeffs;
use nvq_core::gates::{GateSequence, NativeGate};
use nvq_core::matcore::CMat;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hardware::SpinSystem;
use crate::library::PulseLibrary;
use crate::pulse::{local_rotation_pulse, EntanglingOptions, PulseSchedule, Regime};
use crate::sim::{fidelity_report, propagate_with, FidelityReport, Propagation, PropagationStats, SimOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Duration of an exp(iπσ) rotation, s; rotations by ζ take (|ζ|/π)·T_N.
    pub tn: f64,
    /// Entangling (microwave) gate time, s.
    pub t_ent: f64,
    pub seed: u64,
    pub entangling: EntanglingOptions,
    pub sim: SimOptions,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            tn: 10e-6,
            t_ent: 3e-6,
            seed: 1,
            entangling: EntanglingOptions::default(),
            sim: SimOptions::default(),
        }
    }
}

impl PipelineOptions {
    pub fn tau(&self) -> f64 {
        self.entangling.tau
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatePulseSummary {
    pub index: usize,
    pub gate: NativeGate,
    pub regime: Regime,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fom: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub electron_return: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    /// Time order (first played first).
    pub schedules: Vec<PulseSchedule>,
    pub summary: Vec<GatePulseSummary>,
    /// Gates whose pulse optimization missed the FoM threshold.
    pub failures: Vec<String>,
    pub microwave_pulses: usize,
    pub radio_pulses: usize,
}

impl Synthesis {
    pub fn duration(&self) -> f64 {
        self.schedules.iter().map(|s| s.duration()).sum()
    }
}

/// One pulse per native gate (x/y rotations with a z part are split into
/// XYX pieces on the fly).
pub fn synthesize(
    sys: &SpinSystem,
    seq: &GateSequence,
    lib: &mut PulseLibrary,
    opts: &PipelineOptions,
) -> Result<Synthesis> {
    if sys.n() != seq.nqubits {
        return invalid(format!("sequence has {} qubits, register {} nuclei", seq.nqubits, sys.n()));
    }
    seq.validate()?;
    let tau = opts.tau();
    let mut out = Synthesis { schedules: vec![], summary: vec![], failures: vec![], microwave_pulses: 0, radio_pulses: 0 };
    for g in seq.time_order() {
        match g {
            NativeGate::LocalRotation { qubit, coeffs } => {
                let pieces: Vec<[f64; 3]> = if coeffs[2].abs() > 1e-12 {
                    let [a, b, c] = xyx_coeffs(*coeffs);
                    // exp(iaX)exp(ibY)exp(icX): the right factor plays first
                    vec![[c, 0.0, 0.0], [0.0, b, 0.0], [a, 0.0, 0.0]]
                } else {
                    vec![*coeffs]
                };
                for p in pieces {
                    if p.iter().all(|x| x.abs() < 1e-14) {
                        continue;
                    }
                    let s = local_rotation_pulse(sys, *qubit, p, opts.tn, tau)?;
                    out.summary.push(GatePulseSummary {
                        index: out.schedules.len(),
                        gate: s.gate.clone(),
                        regime: s.regime,
                        duration_s: s.duration(),
                        fom: None,
                        predicted_fidelity: None,
                        electron_return: None,
                        converged: None,
                    });
                    out.radio_pulses += 1;
                    out.schedules.push(s);
                }
            }
            NativeGate::DiagonalPhase { .. } => {
                let p = lib.get(sys, g, opts.t_ent, opts.seed, &opts.entangling)?;
                if !p.converged {
                    out.failures.push(format!("{g:?}: FoM {:.6}", p.fom));
                }
                let s = PulseSchedule { gate: g.clone(), field: p.field(sys, tau), regime: Regime::Microwave };
                out.summary.push(GatePulseSummary {
                    index: out.schedules.len(),
                    gate: g.clone(),
                    regime: Regime::Microwave,
                    duration_s: s.duration(),
                    fom: Some(p.fom),
                    predicted_fidelity: Some(p.predicted_fidelity),
                    electron_return: Some(p.electron_return),
                    converged: Some(p.converged),
                });
                out.microwave_pulses += 1;
                out.schedules.push(s);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CircuitRun {
    pub report: FidelityReport,
    pub stats: PropagationStats,
    pub synthesis: Synthesis,
    pub full: CMat,
}

impl CircuitRun {
    pub fn fidelity(&self) -> f64 {
        self.report.fidelity
    }

    pub fn duration(&self) -> f64 {
        self.synthesis.duration()
    }
}

/// Synthesizes and simulates `seq`, comparing against `target`.
pub fn run_circuit(
    sys: &SpinSystem,
    seq: &GateSequence,
    target: &CMat,
    lib: &mut PulseLibrary,
    opts: &PipelineOptions,
) -> Result<CircuitRun> {
    let synthesis = synthesize(sys, seq, lib, opts)?;
    let p = Propagation::new(sys.clone(), synthesis.schedules.clone(), opts.tau());
    let (full, stats) = propagate_with(&p, &opts.sim)?;
    let report = fidelity_report(&full, target)?;
    Ok(CircuitRun { report, stats, synthesis, full })
}

/// Circuit fidelity for each T_N (s); entangling pulses are shared through
/// the library.
pub fn tn_sweep(
    sys: &SpinSystem,
    seq: &GateSequence,
    target: &CMat,
    tns: &[f64],
    lib: &mut PulseLibrary,
    opts: &PipelineOptions,
) -> Result<Vec<(f64, f64)>> {
    tns.iter()
        .map(|&tn| {
            let o = PipelineOptions { tn, ..opts.clone() };
            Ok((tn, run_circuit(sys, seq, target, lib, &o)?.fidelity()))
        })
        .collect()
}
