//! Recursive decomposition driver, peephole merging and XYX lowering.

use std::f64::consts::{FRAC_PI_2, PI};

use log::debug;
use serde::{Deserialize, Serialize};

use crate::cartan::{decompose_k_layer, diagonal_phases, kak_step};
use crate::error::{invalid, Result};
use crate::gates::{GateSequence, NativeGate};
use crate::heuristics::{detect_product, direct_reduce, unwrap_known, Complexity, KnownGate, Side};
use crate::matcore::{
    expand_phases, is_diagonal, is_unitary, max_norm, nqubits, phase_distance, su2, su2_coeffs,
    su_project, wrap_angle, C64, CMat,
};
use crate::su4::su4_canonical_decompose;
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Su4Variant {
    /// Two-qubit nodes go through the same Cartan recursion as larger ones.
    #[default]
    Main,
    /// Two-qubit nodes use the magic-basis canonical decomposition.
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    pub heuristics: bool,
    pub su4: Su4Variant,
    /// Rewrite rotations with a z component as x/y-only products.
    pub lower: bool,
    pub peephole: bool,
    /// Largest k in the unwrap gate set (angles π/2^k); `None` means n.
    pub unwrap_kmax: Option<u32>,
    pub tol: Tolerances,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            heuristics: true,
            su4: Su4Variant::Main,
            lower: true,
            peephole: true,
            unwrap_kmax: None,
            tol: Tolerances::DEFAULT,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Compiled {
    /// Output sequence (lowered when requested).
    pub seq: GateSequence,
    /// Sequence before lowering; gate counts refer to this one.
    pub native: GateSequence,
    /// Where each gate of `native` came from in the recursion.
    pub provenance: Vec<String>,
    /// U ≈ e^{iφ}·product(native).
    pub global_phase: f64,
    /// ‖e^{iφ}·product − U‖_max.
    pub residual: f64,
    pub heuristics_used: bool,
}

impl Compiled {
    pub fn gate_count(&self) -> usize {
        self.native.len()
    }
}

type Tagged = Vec<(NativeGate, String)>;

struct Builder<'a> {
    opts: &'a CompileOptions,
    heuristics: bool,
    out: Tagged,
}

impl Builder<'_> {
    fn push(&mut self, g: NativeGate, tag: String) {
        self.out.push((g, tag));
    }

    fn emit_diag(&mut self, phases: &[f64], qubits: &[usize], tag: String) {
        let p0 = phases[0];
        if phases.iter().all(|p| wrap_angle(p - p0).abs() <= self.opts.tol.identity) {
            return;
        }
        self.push(NativeGate::diag(qubits.to_vec(), phases.to_vec()), tag);
    }

    fn node(&mut self, u: &CMat, qubits: &[usize], tag: &str) -> Result<()> {
        let k = qubits.len();
        let tol = self.opts.tol;
        if k == 0 {
            return Ok(());
        }
        let dim = 1usize << k;
        if phase_distance(u, &CMat::identity(dim, dim)) <= tol.identity {
            return Ok(());
        }
        if is_diagonal(u, tol.identity) {
            self.emit_diag(&diagonal_phases(u), qubits, tag.to_string());
            return Ok(());
        }
        if k == 1 {
            let c = su2_coeffs(u);
            self.push(NativeGate::local(qubits[0], c), tag.to_string());
            return Ok(());
        }
        if self.heuristics && self.try_heuristics(u, qubits, tag)? {
            return Ok(());
        }
        if k == 2 && self.opts.su4 == Su4Variant::Canonical {
            let d = su4_canonical_decompose(u)?;
            for (i, g) in d.seq.gates.into_iter().enumerate() {
                self.push(remap(g, qubits), format!("{tag}/su4.{i}"));
            }
            return Ok(());
        }
        let step = kak_step(u, &tol)?;
        let last = qubits[k - 1];
        let upper = &qubits[..k - 1];
        self.k_node(&step.k_left, qubits, upper, &format!("{tag}/Kl"))?;
        let core: Vec<f64> = step.zetas.iter().flat_map(|&z| [z / 2.0, -z / 2.0]).collect();
        let p0 = core[0];
        if core.iter().any(|p| wrap_angle(p - p0).abs() > tol.identity) {
            self.push(NativeGate::ry(last, -FRAC_PI_2), format!("{tag}/H.ry-"));
            self.push(NativeGate::diag(qubits.to_vec(), core), format!("{tag}/H.d"));
            self.push(NativeGate::ry(last, FRAC_PI_2), format!("{tag}/H.ry+"));
        }
        self.k_node(&step.k_right, qubits, upper, &format!("{tag}/Kr"))
    }

    fn k_node(&mut self, kmat: &CMat, qubits: &[usize], upper: &[usize], tag: &str) -> Result<()> {
        let tol = self.opts.tol;
        let dim = kmat.nrows();
        if phase_distance(kmat, &CMat::identity(dim, dim)) <= tol.identity {
            return Ok(());
        }
        if is_diagonal(kmat, tol.identity) {
            self.emit_diag(&diagonal_phases(kmat), qubits, tag.to_string());
            return Ok(());
        }
        let layer = decompose_k_layer(kmat, &tol)?;
        self.node(&layer.left(), upper, &format!("{tag}.A1"))?;
        self.emit_diag(&layer.diag_phases(), qubits, format!("{tag}.D"));
        self.node(&layer.right(), upper, &format!("{tag}.A2"))
    }

    fn try_heuristics(&mut self, u: &CMat, qubits: &[usize], tag: &str) -> Result<bool> {
        let tol = self.opts.tol;
        let red = direct_reduce(u, tol.reduce)?;
        if red.active.len() < qubits.len() {
            let qs: Vec<usize> = red.active.iter().map(|&q| qubits[q]).collect();
            self.node(&red.reduced, &qs, &format!("{tag}/reduce"))?;
            return Ok(true);
        }
        if let Some(p) = detect_product(u, tol.schmidt) {
            for (i, (b, f)) in p.blocks.iter().zip(&p.factors).enumerate() {
                let qs: Vec<usize> = b.iter().map(|&q| qubits[q]).collect();
                self.node(f, &qs, &format!("{tag}/part{i}"))?;
            }
            return Ok(true);
        }
        let kmax = self.opts.unwrap_kmax.unwrap_or(qubits.len() as u32);
        let uw = unwrap_known(u, kmax, tol.reduce, tol.schmidt)?;
        if uw.steps.is_empty() {
            return Ok(false);
        }
        let (left, right): (Vec<_>, Vec<_>) = uw.steps.iter().enumerate().partition(|(_, s)| s.side == Side::Left);
        for (i, s) in &left {
            let qs: Vec<usize> = s.qubits.iter().map(|&q| qubits[q]).collect();
            self.known(&s.gate, &qs, &format!("{tag}/unwrap{i}"))?;
        }
        self.node(&uw.residual, qubits, &format!("{tag}/residual"))?;
        for (i, s) in right.iter().rev() {
            let qs: Vec<usize> = s.qubits.iter().map(|&q| qubits[q]).collect();
            self.known(&s.gate, &qs, &format!("{tag}/unwrap{i}"))?;
        }
        Ok(true)
    }

    fn known(&mut self, g: &KnownGate, qubits: &[usize], tag: &str) -> Result<()> {
        let saved = self.heuristics;
        self.heuristics = false;
        let r = self.node(&g.matrix(), qubits, tag);
        self.heuristics = saved;
        r
    }
}

fn remap(g: NativeGate, qubits: &[usize]) -> NativeGate {
    match g {
        NativeGate::LocalRotation { qubit, coeffs } => NativeGate::local(qubits[qubit], coeffs),
        NativeGate::DiagonalPhase { qubits: qs, phases } => {
            NativeGate::diag_raw(qs.iter().map(|&q| qubits[q]).collect(), phases)
        }
    }
}

fn commutes(a: &NativeGate, b: &NativeGate) -> bool {
    if a.is_diagonal() && b.is_diagonal() {
        return true;
    }
    let qa = a.qubits();
    b.qubits().iter().all(|q| !qa.contains(q))
}

/// `a·b` if the two gates fuse into one native gate.
fn fuse(a: &NativeGate, b: &NativeGate) -> Option<NativeGate> {
    match (a, b) {
        (NativeGate::LocalRotation { qubit: qa, coeffs: ca }, NativeGate::LocalRotation { qubit: qb, coeffs: cb })
            if qa == qb =>
        {
            Some(NativeGate::local(*qa, su2_coeffs(&(su2(*ca) * su2(*cb)))))
        }
        (NativeGate::DiagonalPhase { qubits: qa, phases: pa }, NativeGate::DiagonalPhase { qubits: qb, phases: pb }) => {
            let mut qs: Vec<usize> = qa.iter().chain(qb.iter()).copied().collect();
            qs.sort_unstable();
            qs.dedup();
            let m = qs.len();
            // positions of each gate's qubits inside the union register
            let pos = |q: &[usize]| -> Vec<usize> { q.iter().map(|x| qs.iter().position(|y| y == x).unwrap()).collect() };
            let ea = expand_phases(pa, &pos(qa), m);
            let eb = expand_phases(pb, &pos(qb), m);
            Some(NativeGate::diag(qs, ea.iter().zip(&eb).map(|(x, y)| x + y).collect()))
        }
        _ => None,
    }
}

/// Canonical form of a single gate: z-only rotations become diagonals,
/// diagonals drop qubits they do not depend on, identities vanish.
fn simplify(g: NativeGate, tol: f64) -> Option<NativeGate> {
    match g {
        NativeGate::LocalRotation { qubit, coeffs } => {
            let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm <= tol {
                None
            } else if coeffs[0].abs() <= tol && coeffs[1].abs() <= tol {
                Some(NativeGate::diag(vec![qubit], vec![coeffs[2], -coeffs[2]]))
            } else {
                Some(NativeGate::local(qubit, coeffs))
            }
        }
        NativeGate::DiagonalPhase { qubits, phases } => {
            let mut qs = qubits;
            let mut ph = phases;
            let mut p = 0;
            while p < qs.len() {
                let m = qs.len();
                let bit = 1usize << (m - 1 - p);
                let idle = (0..ph.len()).all(|s| wrap_angle(ph[s] - ph[s ^ bit]).abs() <= tol);
                if idle {
                    ph = (0..ph.len()).filter(|s| s & bit == 0).map(|s| ph[s]).collect();
                    qs.remove(p);
                } else {
                    p += 1;
                }
            }
            if qs.is_empty() {
                return None;
            }
            Some(NativeGate::diag(qs, ph))
        }
    }
}

/// Merges fusable gates across commuting neighbours and drops identities.
pub fn peephole(gates: Tagged, tol: f64) -> Tagged {
    let mut cur: Tagged = gates.into_iter().filter_map(|(g, t)| simplify(g, tol).map(|g| (g, t))).collect();
    loop {
        let mut changed = false;
        let mut out: Tagged = Vec::with_capacity(cur.len());
        for (g, t) in cur {
            let mut placed = false;
            for j in (0..out.len()).rev() {
                if let Some(f) = fuse(&out[j].0, &g) {
                    let tag = format!("{}+{}", out[j].1, t);
                    match simplify(f, tol) {
                        Some(f) => out[j] = (f, tag),
                        None => {
                            out.remove(j);
                        }
                    }
                    placed = true;
                    changed = true;
                    break;
                }
                if !commutes(&out[j].0, &g) {
                    break;
                }
            }
            if !placed {
                out.push((g, t));
            }
        }
        cur = out;
        if !changed {
            return cur;
        }
    }
}

/// exp(iαX)·exp(iβY)·exp(iγX) equal to exp(i c·σ) up to global phase, with
/// the smallest |α|+|β|+|γ| among the equivalent branches.
pub fn xyx_coeffs(c: [f64; 3]) -> [f64; 3] {
    let u = su2(c);
    // H·U·H swaps X and Z and negates Y: W = exp(iαZ) exp(−iβY) exp(iγZ)
    let w00 = (u[(0, 0)] + u[(0, 1)] + u[(1, 0)] + u[(1, 1)]) * 0.5;
    let w01 = (u[(0, 0)] - u[(0, 1)] + u[(1, 0)] - u[(1, 1)]) * 0.5;
    let b0 = w01.norm().atan2(w00.norm());
    let (s0, d0) = (w00.arg(), w01.arg());
    let mut best = [0.0; 3];
    let mut cost = f64::INFINITY;
    for bp in [b0, -b0, PI - b0, b0 - PI] {
        for ks in -2..=2 {
            for kd in -2..=2 {
                let s = s0 + ks as f64 * PI;
                let d = d0 + kd as f64 * PI;
                let (alpha, gamma) = ((s + d) / 2.0, (s - d) / 2.0);
                let cand = [alpha, -bp, gamma];
                let total = cand.iter().map(|x| x.abs()).sum::<f64>();
                if total + 1e-12 >= cost {
                    continue;
                }
                let m = su2([cand[0], 0.0, 0.0]) * su2([0.0, cand[1], 0.0]) * su2([cand[2], 0.0, 0.0]);
                if phase_distance(&m, &u) < 1e-9 {
                    best = cand;
                    cost = total;
                }
            }
        }
    }
    best
}

/// Rewrites every rotation with a z component into up to three x/y rotations.
pub fn lower_xyx(gates: &Tagged, tol: f64) -> Tagged {
    let mut out = vec![];
    for (g, t) in gates {
        match g {
            NativeGate::LocalRotation { qubit, coeffs } if coeffs[2].abs() > tol => {
                let [a, b, c] = xyx_coeffs(*coeffs);
                for (x, lab, axis) in [(a, "x1", 0), (b, "y", 1), (c, "x2", 0)] {
                    if x.abs() > tol {
                        let mut cc = [0.0; 3];
                        cc[axis] = x;
                        out.push((NativeGate::local(*qubit, cc), format!("{t}/xyx.{lab}")));
                    }
                }
            }
            _ => out.push((g.clone(), t.clone())),
        }
    }
    out
}

fn phase_and_residual(seq: &GateSequence, u: &CMat) -> (f64, f64) {
    let p = seq.matrix();
    let t: C64 = p.iter().zip(u.iter()).map(|(a, b)| a.conj() * b).sum();
    let phi = t.arg();
    let r = max_norm(&(p.map(|z| z * C64::from_polar(1.0, phi)) - u));
    (phi, r)
}

fn run(u: &CMat, n: usize, opts: &CompileOptions, heuristics: bool) -> Result<Compiled> {
    let (s, _) = su_project(u)?;
    let mut b = Builder { opts, heuristics, out: vec![] };
    let qubits: Vec<usize> = (0..n).collect();
    b.node(&s, &qubits, "U")?;
    let mut tagged = b.out;
    if opts.peephole {
        tagged = peephole(tagged, opts.tol.identity);
    }
    let native = GateSequence { nqubits: n, gates: tagged.iter().map(|(g, _)| g.clone()).collect() };
    let final_tagged = if opts.lower { lower_xyx(&tagged, opts.tol.identity) } else { tagged.clone() };
    let seq = GateSequence { nqubits: n, gates: final_tagged.into_iter().map(|(g, _)| g).collect() };
    let (phi, residual) = phase_and_residual(&native, u);
    Ok(Compiled {
        seq,
        native,
        provenance: tagged.into_iter().map(|(_, t)| t).collect(),
        global_phase: phi,
        residual,
        heuristics_used: heuristics,
    })
}

/// Decomposes `u` into native gates. With heuristics on, the direct result
/// is also computed and kept when it is not longer.
pub fn recursive_decompose(u: &CMat, opts: &CompileOptions) -> Result<Compiled> {
    let n = nqubits(u.nrows())?;
    if u.ncols() != u.nrows() {
        return invalid("matrix must be square");
    }
    if !(1..=7).contains(&n) {
        return invalid(format!("{n} qubits is outside the supported range 1..=7"));
    }
    if !is_unitary(u, 1e-8) {
        return invalid("input is not unitary");
    }
    let direct = run(u, n, opts, false)?;
    if !opts.heuristics {
        return Ok(direct);
    }
    let heur = run(u, n, opts, true)?;
    debug!("direct {} gates, heuristic {} gates", direct.gate_count(), heur.gate_count());
    if heur.gate_count() <= direct.gate_count() && heur.residual <= direct.residual.max(1e-7) {
        Ok(heur)
    } else {
        Ok(direct)
    }
}

/// Complexity measure exported for reporting.
pub fn complexity_of(u: &CMat, tol: &Tolerances) -> Complexity {
    crate::heuristics::complexity(u, tol.reduce, tol.schmidt)
}
