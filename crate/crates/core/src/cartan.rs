//! Cartan involutions on su(2^n), the Z-type KAK step and the X-type
//! factorization of the resulting K-layers.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;

use crate::error::{invalid, Error, Result};
use crate::matcore::{
    dominant_index, eig_clusters, eig_unitary, eigh, fix_phase, is_unitary, max_norm,
    polar_unitary, sparse_basis, C64, CMat, Eigen, SkewHermitian, I, ONE, ZERO,
};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Involution {
    /// θ(x) = σ_{N,z} x σ_{N,z}
    ZType,
    /// θ₁(x) = σ_{N,x} x σ_{N,x}
    XType,
}

/// σ x σ with σ = I ⊗ σ_z or I ⊗ σ_x on the last qubit.
pub fn involution_apply(x: &CMat, kind: Involution) -> CMat {
    let n = x.nrows();
    match kind {
        Involution::ZType => CMat::from_fn(n, n, |r, c| {
            let s = if (r ^ c) & 1 == 0 { 1.0 } else { -1.0 };
            x[(r, c)] * s
        }),
        Involution::XType => CMat::from_fn(n, n, |r, c| x[(r ^ 1, c ^ 1)]),
    }
}

pub fn involution_skew(x: &SkewHermitian, kind: Involution) -> SkewHermitian {
    SkewHermitian::with_tol(involution_apply(x.matrix(), kind), f64::INFINITY).unwrap()
}

/// σ_{N,z} or σ_{N,x} as a full matrix.
pub fn sigma_last(kind: Involution, dim: usize) -> CMat {
    sigma_matrix(kind, dim)
}

fn sigma_matrix(kind: Involution, dim: usize) -> CMat {
    match kind {
        Involution::ZType => CMat::from_fn(dim, dim, |r, c| {
            if r == c {
                if r & 1 == 0 {
                    ONE
                } else {
                    -ONE
                }
            } else {
                ZERO
            }
        }),
        Involution::XType => CMat::from_fn(dim, dim, |r, c| if r == (c ^ 1) { ONE } else { ZERO }),
    }
}

fn apply_sigma(v: &[C64], kind: Involution) -> Vec<C64> {
    match kind {
        Involution::ZType => v
            .iter()
            .enumerate()
            .map(|(k, z)| if k & 1 == 0 { *z } else { -*z })
            .collect(),
        Involution::XType => (0..v.len()).map(|k| v[k ^ 1]).collect(),
    }
}

/// g = k + m with θ(k) = k and θ(m) = −m.
pub fn cartan_split(g: &SkewHermitian, kind: Involution) -> (SkewHermitian, SkewHermitian) {
    let t = involution_apply(g.matrix(), kind);
    let k = (g.matrix() + &t).map(|z| z * 0.5);
    let m = (g.matrix() - &t).map(|z| z * 0.5);
    (
        SkewHermitian::with_tol(k, f64::INFINITY).unwrap(),
        SkewHermitian::with_tol(m, f64::INFINITY).unwrap(),
    )
}

/// θ-eigenvalue membership: +1 for 𝔨, −1 for 𝔪.
pub fn in_k(x: &CMat, kind: Involution, tol: f64) -> bool {
    max_norm(&(involution_apply(x, kind) - x)) <= tol
}

pub fn in_m(x: &CMat, kind: Involution, tol: f64) -> bool {
    max_norm(&(involution_apply(x, kind) + x)) <= tol
}

/// M² = θ(G†)·G.
pub fn m_squared(g: &CMat, kind: Involution) -> CMat {
    involution_apply(&g.adjoint(), kind) * g
}

fn columns(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.ncols()).map(|j| m.column(j).iter().cloned().collect()).collect()
}

fn from_columns(d: usize, cols: &[Vec<C64>]) -> CMat {
    CMat::from_fn(d, cols.len(), |i, j| cols[j][i])
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Paired eigenbasis of M² adapted to the involution.
#[derive(Debug, Clone)]
pub struct PairedBasis {
    /// Unitary with column 2j = q₁ of pair j and column 2j+1 = q₂.
    pub q: CMat,
    /// Per-pair angle ζ_j: the M² block is exp(iζ_jσ_x) (Z-type) or exp(iζ_jσ_z) (X-type).
    pub zetas: Vec<f64>,
    /// True when the orthogonality filter could not pick the vectors directly
    /// and an eigenspace was rotated into the σ_z eigenbasis instead.
    pub used_fallback: bool,
}

/// Eigenvalue groups of an M²: indices near +1, near −1, and the non-real
/// clusters.
struct Groups {
    plus: Vec<usize>,
    minus: Vec<usize>,
    complex: Vec<Vec<usize>>,
}

fn group_eigenvalues(values: &[C64], tol: &Tolerances) -> Groups {
    let mut plus = vec![];
    let mut minus = vec![];
    let mut rest = vec![];
    for (k, z) in values.iter().enumerate() {
        let ph = z.arg();
        if ph.abs() <= tol.pairing {
            plus.push(k);
        } else if std::f64::consts::PI - ph.abs() <= tol.pairing {
            minus.push(k);
        } else {
            rest.push(k);
        }
    }
    let sub: Vec<C64> = rest.iter().map(|&k| values[k]).collect();
    let complex = eig_clusters(&sub, tol.eig_cluster)
        .into_iter()
        .map(|cl| cl.into_iter().map(|j| rest[j]).collect())
        .collect();
    Groups { plus, minus, complex }
}

fn span_of(vectors: &CMat, idx: &[usize]) -> CMat {
    CMat::from_fn(vectors.nrows(), idx.len(), |i, j| vectors[(i, idx[j])])
}

fn mean_phase(values: &[C64], idx: &[usize]) -> f64 {
    let s: C64 = idx.iter().map(|&k| values[k]).sum();
    s.arg()
}

/// Splits a σ_z-invariant subspace into its σ_z = +1 and −1 parts.
fn split_by_sigma_z(span: &CMat) -> (CMat, CMat) {
    let sz = sigma_matrix(Involution::ZType, span.nrows());
    let s = span.adjoint() * &sz * span;
    let (vals, vecs) = eigh(&s);
    let up: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.0).collect();
    let lo: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] <= 0.0).collect();
    let upper = span * span_of(&vecs, &up);
    let lower = span * span_of(&vecs, &lo);
    (upper, lower)
}

/// Basis of a degenerate subspace: sparse and phase-fixed, or as given.
fn basis_of(span: &CMat, tol: &Tolerances) -> CMat {
    if tol.sparse_bases {
        sparse_basis(span).0
    } else {
        span.clone()
    }
}

/// Places pairs into slots j (columns 2j, 2j+1) preferring the slot of the
/// dominant component of q₁, so that near-identity inputs give near-identity
/// bases.
fn assign_slots(pairs: Vec<(Vec<C64>, Vec<C64>, f64)>, dim: usize, sparse: bool) -> Result<PairedBasis> {
    let half = dim / 2;
    if pairs.len() != half {
        return Err(Error::DecompositionFailure(format!(
            "constructed {} basis pairs, expected {half}",
            pairs.len()
        )));
    }
    let mut slot: Vec<Option<usize>> = vec![None; half];
    let mut pending = vec![];
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    if sparse {
        order.sort_by_key(|&p| dominant_index(&pairs[p].0));
    }
    for p in order {
        let want = if sparse { dominant_index(&pairs[p].0) / 2 } else { p };
        if slot[want].is_none() {
            slot[want] = Some(p);
        } else {
            pending.push(p);
        }
    }
    for p in pending {
        let free = slot.iter().position(|s| s.is_none()).unwrap();
        slot[free] = Some(p);
    }
    let mut q = CMat::zeros(dim, dim);
    let mut zetas = vec![0.0; half];
    for (j, s) in slot.iter().enumerate() {
        let (q1, q2, z) = &pairs[s.unwrap()];
        for i in 0..dim {
            q[(i, 2 * j)] = q1[i];
            q[(i, 2 * j + 1)] = q2[i];
        }
        zetas[j] = *z;
    }
    Ok(PairedBasis { q, zetas, used_fallback: false })
}

/// Algorithm-1 style selection of `needed` candidates whose σ-transformed
/// basis stays orthonormal and compatible with already committed vectors.
/// Returns indices into `candidates`, or `None` when no subset qualifies.
pub fn orthogonality_filter(
    candidates: &[Vec<C64>],
    kind: Involution,
    committed: &[Vec<C64>],
    needed: usize,
    eps: f64,
) -> Option<Vec<usize>> {
    if needed == 0 {
        return Some(vec![]);
    }
    // compatibility prefilter against committed vectors p: drop v with v†σp > ε
    let admissible: Vec<usize> = (0..candidates.len())
        .filter(|&i| {
            let v = &candidates[i];
            committed.iter().all(|p| {
                let sp = apply_sigma(p, kind);
                inner(v, &sp).norm() <= eps && inner(v, p).norm() <= eps
            })
        })
        .collect();
    if needed > 8 || admissible.len() < needed {
        return None;
    }
    let m = admissible.len();
    // pairwise kernel K = V†σV together with the Gram matrix V†V
    let sig: Vec<Vec<C64>> = admissible.iter().map(|&i| apply_sigma(&candidates[i], kind)).collect();
    let kern = |a: usize, b: usize| inner(&candidates[admissible[a]], &sig[b]);
    let gram = |a: usize, b: usize| inner(&candidates[admissible[a]], &candidates[admissible[b]]);
    let ok_pair = |a: usize, b: usize| gram(a, b).norm() <= eps && kern(a, b).norm() <= eps && kern(b, a).norm() <= eps;
    // lexicographic combination search
    let mut combo: Vec<usize> = (0..needed).collect();
    let mut budget = 200_000usize;
    loop {
        let valid = (0..needed).all(|x| kern(combo[x], combo[x]).norm() <= eps)
            && (0..needed).all(|x| (x + 1..needed).all(|y| ok_pair(combo[x], combo[y])));
        if valid {
            return Some(combo.iter().map(|&c| admissible[c]).collect());
        }
        budget -= 1;
        if budget == 0 {
            return None;
        }
        // next combination
        let mut i = needed;
        loop {
            if i == 0 {
                return None;
            }
            i -= 1;
            if combo[i] < m - needed + i {
                combo[i] += 1;
                for j in i + 1..needed {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Builds the paired basis for an M² given its eigendecomposition.
///
/// Z-type: q₁ = (p + σ_z p)/√2, q₂ = (p − σ_z p)/√2 for non-real eigenvalue
/// pairs; eigenvalues ±1 split into upper/lower halves that are paired
/// directly. The columns satisfy σ_z q₁ = q₁, σ_z q₂ = −q₂ and the block of
/// M² on each pair is exp(iζσ_x).
///
/// X-type: q₁ = normalized (p + σ_z p), q₂ = σ_x q₁, with degenerate
/// eigenspaces passed through the orthogonality filter. The block of M² on
/// each pair is exp(iζσ_z).
pub fn build_paired_basis(eig: &Eigen, kind: Involution, tol: &Tolerances) -> Result<PairedBasis> {
    let dim = eig.vectors.nrows();
    if dim < 2 || dim % 2 != 0 {
        return invalid("paired basis needs an even dimension");
    }
    match kind {
        Involution::ZType => paired_basis_z(eig, tol),
        Involution::XType => paired_basis_x(eig, tol),
    }
}

fn paired_basis_z(eig: &Eigen, tol: &Tolerances) -> Result<PairedBasis> {
    let dim = eig.vectors.nrows();
    let groups = group_eigenvalues(&eig.values, tol);
    let mut pairs: Vec<(Vec<C64>, Vec<C64>, f64)> = vec![];

    for (idx, zeta) in [(&groups.plus, 0.0), (&groups.minus, std::f64::consts::PI)] {
        if idx.is_empty() {
            continue;
        }
        let span = span_of(&eig.vectors, idx);
        let (upper, lower) = split_by_sigma_z(&span);
        if upper.ncols() != lower.ncols() {
            return Err(Error::DecompositionFailure(format!(
                "eigenvalue {} eigenspace splits unevenly ({} upper vs {} lower)",
                if zeta == 0.0 { "+1" } else { "-1" },
                upper.ncols(),
                lower.ncols()
            )));
        }
        let ub = basis_of(&upper, tol);
        let lb = basis_of(&lower, tol);
        for (u, l) in columns(&ub).into_iter().zip(columns(&lb)) {
            pairs.push((u, l, zeta));
        }
    }

    let mut seen = vec![false; groups.complex.len()];
    for (ci, cl) in groups.complex.iter().enumerate() {
        if seen[ci] {
            continue;
        }
        let ph = mean_phase(&eig.values, cl);
        // locate the conjugate cluster
        let partner = groups.complex.iter().enumerate().position(|(cj, other)| {
            cj != ci
                && !seen[cj]
                && other.len() == cl.len()
                && (mean_phase(&eig.values, other) + ph).abs() <= tol.pairing
        });
        let Some(pj) = partner else {
            return Err(Error::DecompositionFailure(format!(
                "eigenvalue e^{{i{ph:.6}}} (multiplicity {}) has no conjugate partner within {:.1e}",
                cl.len(),
                tol.pairing
            )));
        };
        seen[ci] = true;
        seen[pj] = true;
        let (rep, zeta) = if ph > 0.0 { (cl, ph) } else { (&groups.complex[pj], -ph) };
        let span = span_of(&eig.vectors, rep);
        let basis = basis_of(&span, tol);
        for p in columns(&basis) {
            let sp = apply_sigma(&p, Involution::ZType);
            let mut q1: Vec<C64> = p.iter().zip(&sp).map(|(a, b)| (a + b) * FRAC_1_SQRT_2).collect();
            let mut q2: Vec<C64> = p.iter().zip(&sp).map(|(a, b)| (a - b) * FRAC_1_SQRT_2).collect();
            let n1 = norm(&q1);
            let n2 = norm(&q2);
            if n1 < tol.singular || n2 < tol.singular {
                return Err(Error::DecompositionFailure(
                    "eigenvector of a non-real eigenvalue is σ_z-invariant".into(),
                ));
            }
            for x in q1.iter_mut() {
                *x /= n1;
            }
            for x in q2.iter_mut() {
                *x /= n2;
            }
            let k = dominant_index(&q1);
            let f = if q1[k].norm() > 0.0 { q1[k].conj() / q1[k].norm() } else { ONE };
            for x in q1.iter_mut().chain(q2.iter_mut()) {
                *x *= f;
            }
            pairs.push((q1, q2, zeta));
        }
    }
    let mut pb = assign_slots(pairs, dim, tol.sparse_bases)?;
    pb.q = polar_unitary(&pb.q);
    Ok(pb)
}

fn paired_basis_x(eig: &Eigen, tol: &Tolerances) -> Result<PairedBasis> {
    let dim = eig.vectors.nrows();
    let mut clusters = eig_clusters(&eig.values, tol.eig_cluster);
    clusters.sort_by_key(|c| c[0]);
    let mut upper_all: Vec<(Vec<C64>, f64)> = vec![];
    let mut used_fallback = false;
    for cl in &clusters {
        let zeta = mean_phase(&eig.values, cl);
        let span = span_of(&eig.vectors, cl);
        let (upper, _) = split_by_sigma_z(&span);
        let needed = upper.ncols();
        if needed == 0 {
            continue;
        }
        let cols = columns(&span);
        let mut cands = vec![];
        for p in &cols {
            let sp = apply_sigma(p, Involution::ZType);
            let mut q: Vec<C64> = p.iter().zip(&sp).map(|(a, b)| a + b).collect();
            let nq = norm(&q);
            if nq < tol.singular {
                continue; // purely lower: its pair is built from the conjugate cluster
            }
            for x in q.iter_mut() {
                *x /= nq;
            }
            cands.push(q);
        }
        let committed: Vec<Vec<C64>> = upper_all.iter().map(|(v, _)| v.clone()).collect();
        let chosen = orthogonality_filter(&cands, Involution::XType, &committed, needed, tol.filter_eps);
        let vecs: Vec<Vec<C64>> = match chosen {
            Some(sel) => {
                let m = from_columns(dim, &sel.iter().map(|&i| cands[i].clone()).collect::<Vec<_>>());
                columns(&basis_of(&m, tol))
            }
            None => {
                used_fallback = true;
                columns(&basis_of(&upper, tol))
            }
        };
        for v in vecs {
            upper_all.push((v, zeta));
        }
    }
    let pairs = upper_all
        .into_iter()
        .map(|(mut q1, z)| {
            let k = dominant_index(&q1);
            fix_phase(&mut q1, k);
            let q2 = apply_sigma(&q1, Involution::XType);
            (q1, q2, z)
        })
        .collect();
    let mut pb = assign_slots(pairs, dim, tol.sparse_bases)?;
    pb.used_fallback = used_fallback;
    pb.q = polar_unitary(&pb.q);
    Ok(pb)
}

/// Output of the Z-type subalgebra rotation.
#[derive(Debug, Clone)]
pub struct SubalgebraRotation {
    pub k1: CMat,
    /// exp(h) = Σ_j |j⟩⟨j| ⊗ R_x(ζ_j).
    pub zetas: Vec<f64>,
    pub h: SkewHermitian,
}

/// Rotates m into 𝔥 = i·span{|j⟩⟨j| ⊗ σ_x}: returns K₁ with θ(K₁) = K₁ and
/// h ∈ 𝔥 such that M = K₁ exp(h) K₁† squares to `m2`.
pub fn rotate_to_subalgebra(m2: &CMat, tol: &Tolerances) -> Result<SubalgebraRotation> {
    if m2.nrows() < 2 || m2.nrows() % 2 != 0 || !is_unitary(m2, 1e-8) {
        return invalid("M² must be an even-dimensional unitary");
    }
    let eig = eig_unitary(m2)?;
    let pb = build_paired_basis(&eig, Involution::ZType, tol)?;
    let k1 = pb.q;
    // refine the angles from the rotated blocks
    let b = k1.adjoint() * m2 * &k1;
    let zetas: Vec<f64> = (0..b.nrows() / 2)
        .map(|j| {
            let b00 = b[(2 * j, 2 * j)];
            let b01 = b[(2 * j, 2 * j + 1)];
            b01.im.atan2(b00.re)
        })
        .collect();
    let h = subalgebra_element(&zetas, Involution::ZType);
    Ok(SubalgebraRotation { k1, zetas, h })
}

/// Σ_j |j⟩⟨j| ⊗ i(ζ_j/2)σ (σ = σ_x for Z-type, σ_z for X-type).
pub fn subalgebra_element(zetas: &[f64], kind: Involution) -> SkewHermitian {
    let dim = 2 * zetas.len();
    let mut m = CMat::zeros(dim, dim);
    for (j, &z) in zetas.iter().enumerate() {
        let a = I * (z / 2.0);
        match kind {
            Involution::ZType => {
                m[(2 * j, 2 * j + 1)] = a;
                m[(2 * j + 1, 2 * j)] = a;
            }
            Involution::XType => {
                m[(2 * j, 2 * j)] = a;
                m[(2 * j + 1, 2 * j + 1)] = -a;
            }
        }
    }
    SkewHermitian::with_tol(m, f64::INFINITY).unwrap()
}

/// exp of [`subalgebra_element`] in closed form.
pub fn subalgebra_exp(zetas: &[f64], kind: Involution) -> CMat {
    let dim = 2 * zetas.len();
    let mut m = CMat::zeros(dim, dim);
    for (j, &z) in zetas.iter().enumerate() {
        let (s, c) = (z / 2.0).sin_cos();
        match kind {
            Involution::ZType => {
                m[(2 * j, 2 * j)] = C64::new(c, 0.0);
                m[(2 * j + 1, 2 * j + 1)] = C64::new(c, 0.0);
                m[(2 * j, 2 * j + 1)] = C64::new(0.0, s);
                m[(2 * j + 1, 2 * j)] = C64::new(0.0, s);
            }
            Involution::XType => {
                m[(2 * j, 2 * j)] = C64::new(c, s);
                m[(2 * j + 1, 2 * j + 1)] = C64::new(c, -s);
            }
        }
    }
    m
}

/// K = k_factor · U · exp(h₁) · V with all factors except exp(h₁) of the
/// form A ⊗ I on the last qubit.
#[derive(Debug, Clone)]
pub struct KLayer {
    pub k_factor: CMat,
    pub u: CMat,
    pub h1: SkewHermitian,
    pub v: CMat,
    /// Half-dimension blocks: k_factor = C ⊗ I, U = A ⊗ I, V = A† ⊗ I.
    pub c: CMat,
    pub a: CMat,
    /// exp(h₁) = Σ_j |j⟩⟨j| ⊗ exp(i ζ_j/2 σ_z).
    pub zetas: Vec<f64>,
    pub used_fallback: bool,
}

impl KLayer {
    /// (n−1)-qubit factor applied after the diagonal (C·A).
    pub fn left(&self) -> CMat {
        &self.c * &self.a
    }

    /// (n−1)-qubit factor applied before the diagonal (A†).
    pub fn right(&self) -> CMat {
        self.a.adjoint()
    }

    /// Phases of exp(h₁) over all basis states.
    pub fn diag_phases(&self) -> Vec<f64> {
        self.zetas.iter().flat_map(|&z| [z / 2.0, -z / 2.0]).collect()
    }
}

pub fn kron_eye2(a: &CMat) -> CMat {
    a.kronecker(&CMat::identity(2, 2))
}

/// Factorizes a θ-invariant K via the X-type involution.
pub fn decompose_k_layer(k: &CMat, tol: &Tolerances) -> Result<KLayer> {
    let dim = k.nrows();
    if dim < 2 || dim % 2 != 0 || k.ncols() != dim {
        return invalid("K-layer must be an even-dimensional square matrix");
    }
    let viol = max_norm(&(involution_apply(k, Involution::ZType) - k));
    if viol > tol.k_layer {
        return invalid(format!("K is not θ-invariant (‖θ(K) − K‖ = {viol:.3e})"));
    }
    let m1sq = m_squared(k, Involution::XType);
    let eig = eig_unitary(&m1sq)?;
    let pb = build_paired_basis(&eig, Involution::XType, tol)?;
    let half = dim / 2;
    let a = polar_unitary(&CMat::from_fn(half, half, |r, c| pb.q[(2 * r, 2 * c)]));
    let u = kron_eye2(&a);
    // refine angles from the rotated M₁²
    let b = u.adjoint() * &m1sq * &u;
    let zetas: Vec<f64> = (0..half).map(|j| b[(2 * j, 2 * j)].arg()).collect();
    let h1m = subalgebra_exp(&zetas, Involution::XType);
    let m1 = &u * &h1m * u.adjoint();
    let kf = k * m1.adjoint();
    let c = polar_unitary(&CMat::from_fn(half, half, |r, cc| {
        (kf[(2 * r, 2 * cc)] + kf[(2 * r + 1, 2 * cc + 1)]) * 0.5
    }));
    Ok(KLayer {
        k_factor: kron_eye2(&c),
        v: kron_eye2(&a.adjoint()),
        u,
        h1: subalgebra_element(&zetas, Involution::XType),
        c,
        a,
        zetas,
        used_fallback: pb.used_fallback,
    })
}

/// One Z-type KAK step: G = K_l · H · K_r with H = Σ|j⟩⟨j| ⊗ R_x(ζ_j).
#[derive(Debug, Clone)]
pub struct KakStep {
    pub k_left: CMat,
    pub k_right: CMat,
    pub zetas: Vec<f64>,
}

pub fn kak_step(g: &CMat, tol: &Tolerances) -> Result<KakStep> {
    let m2 = m_squared(g, Involution::ZType);
    let rot = rotate_to_subalgebra(&m2, tol)?;
    let h = subalgebra_exp(&rot.zetas, Involution::ZType);
    let m = &rot.k1 * &h * rot.k1.adjoint();
    let k = g * m.adjoint();
    Ok(KakStep { k_left: &k * &rot.k1, k_right: rot.k1.adjoint(), zetas: rot.zetas })
}

/// Diagonal entries' phases of a (numerically) diagonal unitary.
pub fn diagonal_phases(m: &CMat) -> Vec<f64> {
    DVector::from_iterator(m.nrows(), (0..m.nrows()).map(|k| m[(k, k)]))
        .iter()
        .map(|z| z.arg())
        .collect()
}
