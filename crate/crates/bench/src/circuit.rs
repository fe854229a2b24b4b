use std::f64::consts::{FRAC_PI_2, PI};

use nvq_core::known;
use nvq_core::matcore::{diag_from_phases, embed, identity, su2, CMat};
use nvq_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Abstract gate. Rotations follow the register convention
/// R_a(ζ) = exp(iζ/2 σ_a).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractGate {
    pub name: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
}

impl AbstractGate {
    pub fn new(name: &str, qubits: &[usize]) -> Self {
        AbstractGate { name: name.into(), qubits: qubits.to_vec(), param: None }
    }

    pub fn with_param(name: &str, qubits: &[usize], p: f64) -> Self {
        AbstractGate { name: name.into(), qubits: qubits.to_vec(), param: Some(p) }
    }

    /// Fixed qubit count of a named gate; `None` for the QFT blocks (any size).
    fn arity(name: &str) -> Result<Option<usize>> {
        Ok(match name {
            "h" | "x" | "y" | "z" | "s" | "t" | "rx" | "ry" | "rz" => Some(1),
            "cnot" | "cx" | "cz" | "cphase" | "swap" => Some(2),
            "qft" | "qft-noswap" => None,
            other => return Err(Error::InvalidInput(format!("unknown gate '{other}'"))),
        })
    }

    /// Matrix on the gate's own qubits.
    pub fn matrix(&self) -> Result<CMat> {
        if let Some(k) = Self::arity(&self.name)? {
            if self.qubits.len() != k {
                return Err(Error::InvalidInput(format!("{} acts on {k} qubit(s)", self.name)));
            }
        }
        let param = || self.param.ok_or_else(|| Error::InvalidInput(format!("{} needs a parameter", self.name)));
        let half = FRAC_PI_2;
        Ok(match self.name.as_str() {
            "h" => known::hadamard(),
            // Paulis as exp(iπ/2 σ) = iσ; the global phase is immaterial here
            "x" => su2([half, 0.0, 0.0]),
            "y" => su2([0.0, half, 0.0]),
            "z" => su2([0.0, 0.0, half]),
            "s" => diag_from_phases(&[0.0, half]),
            "t" => diag_from_phases(&[0.0, half / 2.0]),
            "rx" => su2([param()? / 2.0, 0.0, 0.0]),
            "ry" => su2([0.0, param()? / 2.0, 0.0]),
            "rz" => su2([0.0, 0.0, param()? / 2.0]),
            "cnot" | "cx" => known::cnot(),
            "cz" => known::cphase(PI),
            "cphase" => known::cphase(param()?),
            "swap" => known::swap(),
            "qft" => known::qft_matrix(self.qubits.len()),
            _ => known::qft_circuit(self.qubits.len()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub nqubits: usize,
    /// Circuit order: `gates[0]` is applied first.
    pub gates: Vec<AbstractGate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CircuitSpec {
    pub fn new(nqubits: usize) -> Self {
        CircuitSpec { nqubits, gates: vec![], seed: None }
    }

    pub fn push(mut self, g: AbstractGate) -> Self {
        self.gates.push(g);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nqubits == 0 || self.nqubits > 10 {
            return Err(Error::InvalidInput(format!("{} qubits not supported", self.nqubits)));
        }
        for g in &self.gates {
            let mut q = g.qubits.clone();
            q.sort_unstable();
            q.dedup();
            AbstractGate::arity(&g.name)?;
            if q.len() != g.qubits.len() || q.iter().any(|&i| i >= self.nqubits) || q.is_empty() {
                return Err(Error::InvalidInput(format!("{}: bad qubits {:?}", g.name, g.qubits)));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: CircuitSpec = serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit specs serialize")
    }

    pub fn cnot() -> Self {
        CircuitSpec::new(2).push(AbstractGate::new("cnot", &[0, 1]))
    }

    pub fn swap() -> Self {
        CircuitSpec::new(2).push(AbstractGate::new("swap", &[0, 1]))
    }

    /// QFT on all qubits as one block (DFT matrix, with the qubit reversal).
    pub fn qft(n: usize) -> Self {
        CircuitSpec::new(n).push(AbstractGate::new("qft", &(0..n).collect::<Vec<_>>()))
    }
}

/// Ordered product of the gate matrices.
pub fn build_unitary(c: &CircuitSpec) -> Result<CMat> {
    c.validate()?;
    let mut u = identity(1 << c.nqubits);
    for g in &c.gates {
        u = embed(&g.matrix()?, &g.qubits, c.nqubits) * u;
    }
    Ok(u)
}

/// `n_cnot` CNOTs on uniformly drawn ordered pairs of distinct qubits.
pub fn random_cnot_circuit(n: usize, n_cnot: usize, seed: u64) -> Result<CircuitSpec> {
    if n < 2 {
        return Err(Error::InvalidInput("random CNOT circuits need at least 2 qubits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gates = (0..n_cnot)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            AbstractGate::new("cnot", &[a, b])
        })
        .collect();
    Ok(CircuitSpec { nqubits: n, gates, seed: Some(seed) })
}
