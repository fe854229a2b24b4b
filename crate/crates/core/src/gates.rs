//! Native gate IR: local x/y(/z) rotations and diagonal phase gates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matcore::{
    apply_1q_left, apply_diag_left, expand_phases, identity, su2, wrap_angle, CMat,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NativeGate {
    /// exp(i(c_x σ_x + c_y σ_y + c_z σ_z)) on one qubit.
    #[serde(rename = "local")]
    LocalRotation { qubit: usize, coeffs: [f64; 3] },
    /// exp(i·diag(phases)) on the listed qubits (first listed most significant).
    #[serde(rename = "diag")]
    DiagonalPhase { qubits: Vec<usize>, phases: Vec<f64> },
}

impl NativeGate {
    pub fn local(qubit: usize, coeffs: [f64; 3]) -> Self {
        NativeGate::LocalRotation { qubit, coeffs }
    }

    /// R_x(ζ) = exp(iζ/2 σ_x).
    pub fn rx(qubit: usize, zeta: f64) -> Self {
        Self::local(qubit, [zeta / 2.0, 0.0, 0.0])
    }

    /// R_y(ζ) = exp(iζ/2 σ_y).
    pub fn ry(qubit: usize, zeta: f64) -> Self {
        Self::local(qubit, [0.0, zeta / 2.0, 0.0])
    }

    /// Diagonal gate with phases normalized so that `phases[0] = 0` (the
    /// removed offset is a global phase) and wrapped into (−π, π].
    pub fn diag(qubits: Vec<usize>, phases: Vec<f64>) -> Self {
        let p0 = phases.first().copied().unwrap_or(0.0);
        let phases = phases.iter().map(|p| wrap_angle(p - p0)).collect();
        NativeGate::DiagonalPhase { qubits, phases }
    }

    /// Diagonal gate keeping the phases exactly as given.
    pub fn diag_raw(qubits: Vec<usize>, phases: Vec<f64>) -> Self {
        NativeGate::DiagonalPhase { qubits, phases }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            NativeGate::LocalRotation { qubit, .. } => vec![*qubit],
            NativeGate::DiagonalPhase { qubits, .. } => qubits.clone(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            NativeGate::DiagonalPhase { .. } => true,
            NativeGate::LocalRotation { coeffs, .. } => coeffs[0] == 0.0 && coeffs[1] == 0.0,
        }
    }

    pub fn is_local(&self) -> bool {
        matches!(self, NativeGate::LocalRotation { .. })
    }

    /// Number of qubits the gate touches.
    pub fn arity(&self) -> usize {
        match self {
            NativeGate::LocalRotation { .. } => 1,
            NativeGate::DiagonalPhase { qubits, .. } => qubits.len(),
        }
    }

    pub fn validate(&self, nqubits: usize) -> Result<()> {
        match self {
            NativeGate::LocalRotation { qubit, coeffs } => {
                if *qubit >= nqubits {
                    return invalid(format!("qubit {qubit} out of range"));
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return invalid("non-finite rotation coefficient");
                }
            }
            NativeGate::DiagonalPhase { qubits, phases } => {
                if qubits.iter().any(|&q| q >= nqubits) {
                    return invalid("diagonal gate qubit out of range");
                }
                let mut s = qubits.clone();
                s.sort_unstable();
                s.dedup();
                if s.len() != qubits.len() {
                    return invalid("diagonal gate lists a qubit twice");
                }
                if phases.len() != 1 << qubits.len() {
                    return invalid(format!(
                        "diagonal gate on {} qubits needs {} phases, got {}",
                        qubits.len(),
                        1 << qubits.len(),
                        phases.len()
                    ));
                }
                if phases.iter().any(|p| !p.is_finite()) {
                    return invalid("non-finite phase");
                }
            }
        }
        Ok(())
    }

    /// Applies the gate from the left: m ← G·m.
    pub fn apply_left(&self, m: &mut CMat, n: usize) {
        match self {
            NativeGate::LocalRotation { qubit, coeffs } => apply_1q_left(m, &su2(*coeffs), *qubit, n),
            NativeGate::DiagonalPhase { qubits, phases } => {
                apply_diag_left(m, &expand_phases(phases, qubits, n))
            }
        }
    }

    pub fn matrix(&self, n: usize) -> CMat {
        let mut m = identity(1 << n);
        self.apply_left(&mut m, n);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSequence {
    pub nqubits: usize,
    /// Matrix-product order: `gates[0]` is the leftmost factor (applied last).
    pub gates: Vec<NativeGate>,
}

/// Gate-type census by arity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub local: usize,
    /// `diagonal[k]` counts diagonal gates on k qubits.
    pub diagonal: Vec<usize>,
}

impl Census {
    pub fn diagonal_total(&self) -> usize {
        self.diagonal.iter().sum()
    }
}

impl GateSequence {
    pub fn new(nqubits: usize) -> Self {
        GateSequence { nqubits, gates: vec![] }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        self.gates.iter().try_for_each(|g| g.validate(self.nqubits))
    }

    /// Ordered product of the realized gate matrices.
    pub fn matrix(&self) -> CMat {
        let mut m = identity(1 << self.nqubits);
        for g in self.gates.iter().rev() {
            g.apply_left(&mut m, self.nqubits);
        }
        m
    }

    pub fn census(&self) -> Census {
        let mut c = Census { local: 0, diagonal: vec![0; self.nqubits + 1] };
        for g in &self.gates {
            match g {
                NativeGate::LocalRotation { .. } => c.local += 1,
                NativeGate::DiagonalPhase { qubits, .. } => c.diagonal[qubits.len()] += 1,
            }
        }
        c
    }

    /// Gates in time order (first applied first).
    pub fn time_order(&self) -> impl Iterator<Item = &NativeGate> {
        self.gates.iter().rev()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("gate sequences always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let seq: GateSequence =
            serde_json::from_str(s).map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
        seq.validate()?;
        Ok(seq)
    }
}
