//! Circuit shortening ahead of (and inside) the recursion: idle-qubit
//! removal, tensor-product splitting and unwrapping of known gates.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::known;
use crate::matcore::{eigh, embed, max_norm, nqubits, C64, CMat};
use crate::Result;

/// `idx` (of n−1 bits) with bit `b` inserted at qubit position `q` of `n`.
fn insert_bit(idx: usize, q: usize, n: usize, b: usize) -> usize {
    let p = n - 1 - q;
    let hi = idx >> p;
    let lo = idx & ((1 << p) - 1);
    (hi << (p + 1)) | (b << p) | lo
}

fn block(u: &CMat, q: usize, n: usize, br: usize, bc: usize) -> CMat {
    let d = 1usize << (n - 1);
    CMat::from_fn(d, d, |r, c| u[(insert_bit(r, q, n, br), insert_bit(c, q, n, bc))])
}

fn is_idle(u: &CMat, q: usize, n: usize, tol: f64) -> bool {
    let b00 = block(u, q, n, 0, 0);
    max_norm(&block(u, q, n, 0, 1)) <= tol
        && max_norm(&block(u, q, n, 1, 0)) <= tol
        && max_norm(&(block(u, q, n, 1, 1) - b00)) <= tol
}

#[derive(Debug, Clone)]
pub struct Reduction {
    /// Qubits (of the input) on which the operator acts non-trivially.
    pub active: Vec<usize>,
    pub reduced: CMat,
}

/// Strips qubits on which `u` acts as the identity.
pub fn direct_reduce(u: &CMat, tol: f64) -> Result<Reduction> {
    let n = nqubits(u.nrows())?;
    let mut cur = u.clone();
    let mut active: Vec<usize> = (0..n).collect();
    let mut k = 0;
    while k < active.len() {
        let m = active.len();
        if is_idle(&cur, k, m, tol) {
            cur = block(&cur, k, m, 0, 0);
            active.remove(k);
        } else {
            k += 1;
        }
    }
    Ok(Reduction { active, reduced: cur })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionReport {
    /// Disjoint sorted qubit sets covering all qubits, ordered by first qubit.
    pub blocks: Vec<Vec<usize>>,
    #[serde(skip)]
    pub factors: Vec<CMat>,
}

impl PartitionReport {
    /// Kronecker product of the factors placed back on their qubits.
    pub fn reassemble(&self, n: usize) -> CMat {
        let mut m = CMat::identity(1 << n, 1 << n);
        for (b, f) in self.blocks.iter().zip(&self.factors) {
            m = embed(f, b, n) * m;
        }
        m
    }
}

/// Operator-Schmidt test across the cut (`part`, rest). Returns unitary
/// factors on `part` and on the complement if the operator is a product.
fn split_cut(u: &CMat, n: usize, part: &[usize], tol: f64) -> Option<(CMat, CMat)> {
    let rest: Vec<usize> = (0..n).filter(|q| !part.contains(q)).collect();
    let (a, b) = (part.len(), rest.len());
    let (da, db) = (1usize << a, 1usize << b);
    let index = |ia: usize, ib: usize| -> usize {
        let mut idx = 0;
        for (k, &q) in part.iter().enumerate() {
            idx |= ((ia >> (a - 1 - k)) & 1) << (n - 1 - q);
        }
        for (k, &q) in rest.iter().enumerate() {
            idx |= ((ib >> (b - 1 - k)) & 1) << (n - 1 - q);
        }
        idx
    };
    let r = CMat::from_fn(da * da, db * db, |row, col| {
        let (ia, ja) = (row / da, row % da);
        let (ib, jb) = (col / db, col % db);
        u[(index(ia, ib), index(ja, jb))]
    });
    // leading operator-Schmidt pair from the Gram matrix of the smaller side
    let wide = r.nrows() < r.ncols();
    let gram = if wide { &r * r.adjoint() } else { r.adjoint() * &r };
    let (vals, vecs) = eigh(&gram);
    let m = vals.len();
    let s0 = vals[m - 1].max(0.0).sqrt();
    let s1 = if m > 1 { vals[m - 2].max(0.0).sqrt() } else { 0.0 };
    if s0 <= 0.0 || s1 > tol * s0 {
        return None;
    }
    let top = vecs.column(m - 1).into_owned();
    // R ≈ left·rightᵀ
    let (left, right) = if wide {
        let rt = r.adjoint() * &top;
        (top, rt.map(|z| z.conj()))
    } else {
        (&r * &top, top.map(|z| z.conj()))
    };
    let mut fa = CMat::from_fn(da, da, |i, j| left[i * da + j]);
    let mut fb = CMat::from_fn(db, db, |i, j| right[i * db + j]);
    let na = fa.norm();
    let alpha = (da as f64).sqrt() / na;
    fa *= C64::new(alpha, 0.0);
    fb *= C64::new(1.0 / alpha, 0.0);
    Some((fa, fb))
}

fn finest(u: &CMat, qubits: &[usize], tol: f64, out: &mut Vec<(Vec<usize>, CMat)>) {
    let n = qubits.len();
    if n >= 2 {
        // cuts containing local qubit 0, smallest first
        let mut cuts: Vec<Vec<usize>> = (0..(1usize << (n - 1)) - 1)
            .map(|mask| {
                let mut s = vec![0];
                s.extend((1..n).filter(|&q| (mask >> (q - 1)) & 1 == 1));
                s
            })
            .collect();
        cuts.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
        for cut in cuts {
            if let Some((fa, fb)) = split_cut(u, n, &cut, tol) {
                let rest: Vec<usize> = (0..n).filter(|q| !cut.contains(q)).collect();
                let qa: Vec<usize> = cut.iter().map(|&q| qubits[q]).collect();
                let qb: Vec<usize> = rest.iter().map(|&q| qubits[q]).collect();
                finest(&fa, &qa, tol, out);
                finest(&fb, &qb, tol, out);
                return;
            }
        }
    }
    out.push((qubits.to_vec(), u.clone()));
}

/// Finest tensor-product partition, or `None` if `u` does not factor.
pub fn detect_product(u: &CMat, tol: f64) -> Option<PartitionReport> {
    let n = nqubits(u.nrows()).ok()?;
    if n < 2 {
        return None;
    }
    let qubits: Vec<usize> = (0..n).collect();
    let mut parts = vec![];
    finest(u, &qubits, tol, &mut parts);
    if parts.len() < 2 {
        return None;
    }
    parts.sort_by_key(|(b, _)| b[0]);
    let (blocks, factors) = parts.into_iter().unzip();
    Some(PartitionReport { blocks, factors })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KnownGate {
    /// R_x(±π/2^k)
    Rx { k: u32, negative: bool },
    Ry { k: u32, negative: bool },
    Cnot,
    Swap,
    /// diag(1,1,1,e^{±iπ/2^k})
    CPhase { k: u32, negative: bool },
}

impl KnownGate {
    fn angle(k: u32, negative: bool) -> f64 {
        let a = std::f64::consts::PI / (1u64 << k) as f64;
        if negative {
            -a
        } else {
            a
        }
    }

    pub fn matrix(&self) -> CMat {
        match *self {
            KnownGate::Rx { k, negative } => known::rx(Self::angle(k, negative)),
            KnownGate::Ry { k, negative } => known::ry(Self::angle(k, negative)),
            KnownGate::Cnot => known::cnot(),
            KnownGate::Swap => known::swap(),
            KnownGate::CPhase { k, negative } => known::cphase(Self::angle(k, negative)),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            KnownGate::Rx { .. } | KnownGate::Ry { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Left: U = G·U′. Right: U = U′·G.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnwrapStep {
    pub gate: KnownGate,
    pub side: Side,
    pub qubits: Vec<usize>,
}

impl UnwrapStep {
    pub fn embedded(&self, n: usize) -> CMat {
        embed(&self.gate.matrix(), &self.qubits, n)
    }
}

/// (active-qubit count, block sizes in descending order); smaller is simpler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Complexity(pub usize, pub Vec<usize>);

impl PartialOrd for Complexity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Complexity {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0).then_with(|| self.1.cmp(&other.1))
    }
}

pub fn complexity(u: &CMat, reduce_tol: f64, schmidt_tol: f64) -> Complexity {
    let red = match direct_reduce(u, reduce_tol) {
        Ok(r) => r,
        Err(_) => return Complexity(usize::MAX, vec![]),
    };
    let k = red.active.len();
    let mut sizes = match detect_product(&red.reduced, schmidt_tol) {
        Some(p) => p.blocks.iter().map(|b| b.len()).collect(),
        None => vec![k],
    };
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    if k == 0 {
        sizes.clear();
    }
    Complexity(k, sizes)
}

/// Candidate known gates in search order: singles before pairs, ascending k.
pub fn gate_set(n: usize, kmax: u32) -> Vec<(KnownGate, Vec<usize>)> {
    let mut out = vec![];
    for k in 0..=kmax {
        for negative in [false, true] {
            for q in 0..n {
                out.push((KnownGate::Rx { k, negative }, vec![q]));
                out.push((KnownGate::Ry { k, negative }, vec![q]));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    for &(a, b) in &pairs {
        out.push((KnownGate::Cnot, vec![a, b]));
        out.push((KnownGate::Cnot, vec![b, a]));
    }
    for &(a, b) in &pairs {
        out.push((KnownGate::Swap, vec![a, b]));
    }
    for k in 0..=kmax {
        for negative in [false, true] {
            for &(a, b) in &pairs {
                out.push((KnownGate::CPhase { k, negative }, vec![a, b]));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Unwrapped {
    pub steps: Vec<UnwrapStep>,
    pub residual: CMat,
}

impl Unwrapped {
    /// U = L₁⋯L_p · residual · R_q⋯R₁ in the order the steps were found.
    pub fn reassemble(&self, n: usize) -> CMat {
        let mut m = self.residual.clone();
        for s in self.steps.iter().rev() {
            let g = s.embedded(n);
            m = match s.side {
                Side::Left => g * m,
                Side::Right => m * g,
            };
        }
        m
    }
}

/// Greedy unwrapping: repeatedly strips the first gate (in search order)
/// whose removal strictly lowers the complexity measure.
pub fn unwrap_known(u: &CMat, kmax: u32, reduce_tol: f64, schmidt_tol: f64) -> Result<Unwrapped> {
    let n = nqubits(u.nrows())?;
    let set = gate_set(n, kmax);
    let mut cur = u.clone();
    let mut best = complexity(&cur, reduce_tol, schmidt_tol);
    let mut steps = vec![];
    'outer: while best.0 > 0 {
        for (gate, qubits) in &set {
            let g = embed(&gate.matrix(), qubits, n);
            for side in [Side::Left, Side::Right] {
                let cand = match side {
                    Side::Left => g.adjoint() * &cur,
                    Side::Right => &cur * g.adjoint(),
                };
                let c = complexity(&cand, reduce_tol, schmidt_tol);
                if c < best {
                    cur = cand;
                    best = c;
                    steps.push(UnwrapStep { gate: *gate, side, qubits: qubits.clone() });
                    continue 'outer;
                }
            }
        }
        break;
    }
    Ok(Unwrapped { steps, residual: cur })
}
