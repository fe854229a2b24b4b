//! Published gate-coefficient tables for the SWAP (main decomposition) and QFT3
//! circuits, shipped as JSON under `fixtures/`.

use std::collections::BTreeMap;

use nvq_core::gates::{GateSequence, NativeGate};
use nvq_core::known;
use nvq_core::matcore::{phase_distance, CMat};
use nvq_core::{Error, Result};
use serde::{Deserialize, Serialize};

const SWAP_JSON: &str = include_str!("../fixtures/swap_main.json");
const QFT3_JSON: &str = include_str!("../fixtures/qft3.json");

/// One table row, or a rotation the table leaves implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureGate {
    pub label: String,
    pub listed: bool,
    pub gate: NativeGate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub nqubits: usize,
    /// `swap`, `qft3` (DFT) or `qft3-noswap` (bit-reversed DFT).
    pub target: String,
    pub note: String,
    pub constants: BTreeMap<String, f64>,
    /// Time order (first applied first).
    pub gates: Vec<FixtureGate>,
}

impl Fixture {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// The fixture as a native sequence (matrix-product order).
    pub fn sequence(&self) -> GateSequence {
        GateSequence { nqubits: self.nqubits, gates: self.gates.iter().rev().map(|g| g.gate.clone()).collect() }
    }

    pub fn listed(&self) -> usize {
        self.gates.iter().filter(|g| g.listed).count()
    }
}

pub fn target_matrix(name: &str) -> Result<CMat> {
    Ok(match name {
        "swap" => known::swap(),
        "cnot" => known::cnot(),
        "qft3" => known::qft_matrix(3),
        "qft3-noswap" => known::qft_circuit(3),
        other => return Err(Error::InvalidInput(format!("unknown fixture target '{other}'"))),
    })
}

pub fn fixtures() -> Vec<Fixture> {
    [SWAP_JSON, QFT3_JSON].iter().map(|s| Fixture::from_json(s).expect("bundled fixtures parse")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub name: String,
    /// Target convention giving the smaller residual.
    pub target: String,
    /// Max-norm distance up to global phase, per target convention tried.
    pub residuals: BTreeMap<String, f64>,
    pub residual: f64,
    pub passed: bool,
    /// For the QFT fixture: with the last four gates (Ry+, NV6, Ry−, NV7)
    /// peeled off the target, how far the rest is from block-diagonal in the
    /// last qubit (zero means the outer layer is exact).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_layer_residual: Option<f64>,
}

/// Product of the fixture against its target (and the other QFT convention
/// for the QFT fixture).
pub fn check_fixture(f: &Fixture, tol: f64) -> Result<FixtureCheck> {
    let m = f.sequence().matrix();
    let mut names = vec![f.target.clone()];
    if f.target.starts_with("qft3") {
        names = vec!["qft3".into(), "qft3-noswap".into()];
    }
    let mut residuals = BTreeMap::new();
    for n in &names {
        residuals.insert(n.clone(), phase_distance(&m, &target_matrix(n)?));
    }
    let (target, residual) = residuals
        .iter()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, v)| (k.clone(), *v))
        .expect("at least one target");
    let outer_layer_residual = if f.target.starts_with("qft3") {
        Some(peeled_offblock(f, 4, &target_matrix(&target)?))
    } else {
        None
    };
    Ok(FixtureCheck { name: f.name.clone(), target, residuals, residual, passed: residual <= tol, outer_layer_residual })
}

/// Max entry of the off-diagonal blocks (in the last qubit) of
/// (last `k` gates)† · target.
pub fn peeled_offblock(f: &Fixture, k: usize, target: &CMat) -> f64 {
    let tail = &f.gates[f.gates.len() - k..];
    let seq = GateSequence { nqubits: f.nqubits, gates: tail.iter().rev().map(|g| g.gate.clone()).collect() };
    let rest = seq.matrix().adjoint() * target;
    let mut m = 0.0f64;
    for i in 0..rest.nrows() {
        for j in 0..rest.ncols() {
            if (i ^ j) & 1 == 1 {
                m = m.max(rest[(i, j)].norm());
            }
        }
    }
    m
}
