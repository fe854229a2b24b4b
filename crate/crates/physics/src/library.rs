//! Content-addressed cache of optimized microwave pulses, optionally backed
//! by a directory holding one CSV + JSON sidecar pair per gate.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nvq_core::gates::NativeGate;
use nvq_core::matcore::{expand_phases, wrap_angle};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::hardware::{DriveField, SpinSystem};
use crate::pulse::{optimize_entangling_pulse, EntanglingOptions, EntanglingPulse, PulseSchedule};

#[derive(Serialize)]
struct KeyMaterial<'a> {
    phases: Vec<String>,
    system: &'a SpinSystem,
    gate_time: String,
    seed: u64,
    opts: &'a EntanglingOptions,
}

/// Hash of (full-register phases, system, gate time, optimizer settings).
pub fn pulse_key(
    sys: &SpinSystem,
    gate: &NativeGate,
    gate_time: f64,
    seed: u64,
    opts: &EntanglingOptions,
) -> Result<String> {
    let NativeGate::DiagonalPhase { qubits, phases } = gate else {
        return invalid("only diagonal gates have library entries");
    };
    let full = expand_phases(phases, qubits, sys.n());
    let p0 = full[0];
    let phases = full
        .iter()
        .map(|p| {
            // identical gates from different decomposition branches differ in the last bits
            let w = wrap_angle(p - p0);
            let w = if (w - std::f64::consts::PI).abs() < 1e-9 { std::f64::consts::PI } else { w };
            format!("{:.9}", w + 0.0)
        })
        .collect();
    let km = KeyMaterial { phases, system: sys, gate_time: format!("{gate_time:.12e}"), seed, opts };
    let bytes = serde_json::to_vec(&km)?;
    Ok(hex(&Sha256::digest(bytes)))
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    key: String,
    gate: NativeGate,
    duration_s: f64,
    pulse: EntanglingPulse,
}

#[derive(Debug, Default)]
pub struct PulseLibrary {
    dir: Option<PathBuf>,
    entries: HashMap<String, EntanglingPulse>,
    read_only: bool,
    pub hits: usize,
    pub misses: usize,
}

impl PulseLibrary {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl AsRef<Path>) -> Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(PulseLibrary { dir: Some(dir.as_ref().to_path_buf()), ..Default::default() })
    }

    /// Loads existing entries only; a miss is an error naming the gate.
    pub fn read_only(dir: impl AsRef<Path>) -> Result<Self> {
        if !dir.as_ref().is_dir() {
            return invalid(format!("pulse library {} does not exist", dir.as_ref().display()));
        }
        Ok(PulseLibrary { dir: Some(dir.as_ref().to_path_buf()), read_only: true, ..Default::default() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn load(&self, key: &str) -> Option<EntanglingPulse> {
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let s = fs::read_to_string(path).ok()?;
        serde_json::from_str::<Sidecar>(&s).ok().map(|sc| sc.pulse)
    }

    /// Cached pulse for `gate`, optimizing on a miss. Pulses that missed the
    /// FoM threshold are returned (and cached) with `converged = false`.
    pub fn get(
        &mut self,
        sys: &SpinSystem,
        gate: &NativeGate,
        gate_time: f64,
        seed: u64,
        opts: &EntanglingOptions,
    ) -> Result<EntanglingPulse> {
        let key = pulse_key(sys, gate, gate_time, seed, opts)?;
        if let Some(p) = self.entries.get(&key) {
            self.hits += 1;
            return Ok(adopt(p, gate));
        }
        if let Some(p) = self.load(&key) {
            self.hits += 1;
            self.entries.insert(key, p.clone());
            return Ok(adopt(&p, gate));
        }
        self.misses += 1;
        if self.read_only {
            return invalid(format!("no pulse in library for {gate:?} (key {key})"));
        }
        let p = match optimize_entangling_pulse(sys, gate, gate_time, seed, opts) {
            Ok(p) => p,
            Err(Error::OptimizationFailure { best, .. }) => *best,
            Err(e) => return Err(e),
        };
        if let Some(dir) = &self.dir {
            write_pair(dir, &key, sys, &p, opts.tau)?;
        }
        self.entries.insert(key, p.clone());
        Ok(p)
    }
}

fn adopt(p: &EntanglingPulse, gate: &NativeGate) -> EntanglingPulse {
    let mut p = p.clone();
    p.gate = gate.clone();
    p
}

/// CSV columns (t_ns, envelope_T, carrier_rad_per_s, phase_rad).
pub fn write_field_csv(path: &Path, field: &DriveField) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Internal(e.to_string()))?;
    let io = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(["t_ns", "envelope_T", "carrier_rad_per_s", "phase_rad"]).map_err(io)?;
    for (k, b) in field.envelope.iter().enumerate() {
        let t = (field.t0 + k as f64 * field.tau) * 1e9;
        w.write_record([
            format!("{t:.17e}"),
            format!("{b:.17e}"),
            format!("{:.17e}", field.carrier),
            format!("{:.17e}", field.phase),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn write_pair(dir: &Path, key: &str, sys: &SpinSystem, p: &EntanglingPulse, tau: f64) -> Result<()> {
    write_field_csv(&dir.join(format!("{key}.csv")), &p.field(sys, tau))?;
    let sc = Sidecar { key: key.into(), gate: p.gate.clone(), duration_s: p.duration(), pulse: p.clone() };
    fs::write(dir.join(format!("{key}.json")), serde_json::to_string_pretty(&sc)?)?;
    Ok(())
}

/// Writes every schedule of a circuit as `NNN_<kind>.csv` plus `NNN_<kind>.json`.
pub fn write_schedules(dir: &Path, schedules: &[PulseSchedule]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, s) in schedules.iter().enumerate() {
        let kind = match s.regime {
            crate::pulse::Regime::Radio { nucleus } => format!("radio_q{nucleus}"),
            crate::pulse::Regime::Microwave => "microwave".to_string(),
        };
        let stem = format!("{i:03}_{kind}");
        write_field_csv(&dir.join(format!("{stem}.csv")), &s.field)?;
        let meta = serde_json::json!({
            "index": i,
            "gate": s.gate,
            "regime": s.regime,
            "duration_s": s.duration(),
            "carrier_rad_per_s": s.field.carrier,
            "phase_rad": s.field.phase,
            "t0_s": s.field.t0,
        });
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;
    }
    Ok(())
}
