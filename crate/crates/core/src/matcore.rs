//! Dense complex matrix helpers for dimensions up to 2^7.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::tol::Tolerances;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn cis(phi: f64) -> C64 {
    C64::from_polar(1.0, phi)
}

/// Number of qubits for a `2^n`-dimensional space.
pub fn nqubits(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return invalid(format!("dimension {dim} is not a positive power of two"));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols()));
    }
    nqubits(m.nrows())
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn max_norm(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn unitarity_error(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    max_norm(&(g - identity(u.nrows())))
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    u.nrows() == u.ncols() && unitarity_error(u) <= tol
}

pub fn is_hermitian(h: &CMat, tol: f64) -> bool {
    h.nrows() == h.ncols() && max_norm(&(h - h.adjoint())) <= tol
}

pub fn is_diagonal(m: &CMat, tol: f64) -> bool {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)].norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Anti-Hermitian matrix (Lie-algebra element of u(2^n)).
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitian(CMat);

impl SkewHermitian {
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tol(m, Tolerances::DEFAULT.skew)
    }

    pub fn with_tol(m: CMat, tol: f64) -> Result<Self> {
        check_square(&m)?;
        let err = max_norm(&(&m + m.adjoint()));
        if err > tol {
            return invalid(format!("matrix is not skew-Hermitian (‖A+A†‖ = {err:.3e})"));
        }
        Ok(SkewHermitian(m))
    }

    /// `i·H` for Hermitian `H`.
    pub fn from_hermitian(h: &CMat) -> Result<Self> {
        Self::new(h.map(|z| z * I))
    }

    pub fn zeros(dim: usize) -> Self {
        SkewHermitian(CMat::zeros(dim, dim))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Hermitian eigendecomposition, eigenvalues ascending.
pub fn eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let herm = (h + h.adjoint()).map(|z| z * 0.5);
    let se = SymmetricEigen::new(herm);
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let n = h.nrows();
    let mut vecs = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (k, &j) in idx.iter().enumerate() {
        vals.push(se.eigenvalues[j]);
        vecs.set_column(k, &se.eigenvectors.column(j));
    }
    (vals, vecs)
}

/// `exp(-i·H·t)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, t: f64) -> CMat {
    let (vals, v) = eigh(h);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&l| cis(-l * t)));
    &v * CMat::from_diagonal(&d) * v.adjoint()
}

pub fn exp_skew(a: &SkewHermitian) -> Result<CMat> {
    check_square(a.matrix())?;
    // A = iH with H = −iA Hermitian, so exp(A) = exp(−iH·(−1)).
    let h = a.matrix().map(|z| z * (-I));
    Ok(expm_hermitian(&h, -1.0))
}

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: CMat,
}

/// Eigendecomposition of a unitary via complex Schur form (which is diagonal
/// for normal matrices, so the Schur vectors are an orthonormal eigenbasis).
pub fn eig_unitary(u: &CMat) -> Result<Eigen> {
    let n = check_square(u).map(|q| 1usize << q)?;
    let Some(schur) = nalgebra::linalg::Schur::try_new(u.clone(), 1e-15, 100_000) else {
        return Ok(eig_unitary_hermitian(u));
    };
    let (q, t) = schur.unpack();
    let values = (0..n)
        .map(|k| {
            let z = t[(k, k)];
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                ONE
            }
        })
        .collect();
    Ok(Eigen { values, vectors: q })
}

/// Fallback for near-degenerate unitaries, where the Schur iteration can
/// stall: U = H + iK with commuting Hermitian H, K, so a generic real
/// combination of the two shares U's eigenvectors.
fn eig_unitary_hermitian(u: &CMat) -> Eigen {
    let ud = u.adjoint();
    let h = (u + &ud).map(|z| z * 0.5);
    let k = (u - &ud).map(|z| z * C64::new(0.0, -0.5));
    let (_, v) = eigh(&(h + k * C64::new(0.618_033_988_749_894_9, 0.0)));
    let values = (0..v.ncols())
        .map(|j| {
            let c = v.column(j);
            let z = (c.adjoint() * u * c)[(0, 0)];
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                ONE
            }
        })
        .collect();
    Eigen { values, vectors: v }
}

/// Groups eigenvalue indices whose phases agree within `tol` (on the circle).
pub fn eig_clusters(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    if n == 0 {
        return vec![];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let ph: Vec<f64> = values.iter().map(|z| z.arg()).collect();
    idx.sort_by(|&a, &b| ph[a].total_cmp(&ph[b]));
    let mut clusters: Vec<Vec<usize>> = vec![vec![idx[0]]];
    for w in idx.windows(2) {
        if ph[w[1]] - ph[w[0]] <= tol {
            clusters.last_mut().unwrap().push(w[1]);
        } else {
            clusters.push(vec![w[1]]);
        }
    }
    if clusters.len() > 1 {
        let first = ph[idx[0]];
        let last = ph[idx[n - 1]];
        if first + 2.0 * PI - last <= tol {
            let head = clusters.remove(0);
            clusters.last_mut().unwrap().extend(head);
        }
    }
    for c in clusters.iter_mut() {
        c.sort_unstable();
    }
    clusters
}

/// Index of the largest-magnitude component (lowest index among near ties).
pub fn dominant_index(v: &[C64]) -> usize {
    let mut best = 0;
    let mut bm = -1.0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > bm + 1e-9 {
            bm = z.norm();
            best = k;
        }
    }
    best
}

/// Rescales a vector by a unit phase so that component `k` is real positive.
pub fn fix_phase(v: &mut [C64], k: usize) {
    let z = v[k];
    if z.norm() > 0.0 {
        let f = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= f;
        }
    }
}

/// Re-expresses the span of the orthonormal columns of `span` in a basis that
/// is as close as possible to computational basis vectors. Returns the basis
/// (columns ordered by pivot index) and the pivots.
pub fn sparse_basis(span: &CMat) -> (CMat, Vec<usize>) {
    let d = span.nrows();
    let m = span.ncols();
    let mut chosen: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut pivots = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(f64, usize, Vec<C64>)> = None;
        for k in 0..d {
            if pivots.contains(&k) {
                continue;
            }
            // projection of e_k onto the span: V (V† e_k) = V · conj(row k)
            let mut r: Vec<C64> = (0..d)
                .map(|i| (0..m).map(|j| span[(i, j)] * span[(k, j)].conj()).sum())
                .collect();
            for c in &chosen {
                let ov: C64 = c.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in r.iter_mut().zip(c) {
                    *x -= ov * y;
                }
            }
            let nrm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |b| nrm > b.0 + 1e-9) {
                best = Some((nrm, k, r));
            }
        }
        let (nrm, k, mut r) = best.expect("span has more columns than rows");
        for x in r.iter_mut() {
            *x /= nrm;
        }
        fix_phase(&mut r, k);
        chosen.push(r);
        pivots.push(k);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&j| pivots[j]);
    let mut out = CMat::zeros(d, m);
    let mut piv = Vec::with_capacity(m);
    for (col, &j) in order.iter().enumerate() {
        for i in 0..d {
            out[(i, col)] = chosen[j][i];
        }
        piv.push(pivots[j]);
    }
    (out, piv)
}

/// Eigendecomposition with a deterministic, sparse basis inside each
/// degenerate cluster and every vector phase-fixed at its dominant component.
pub fn eig_unitary_canonical(u: &CMat, tol: &Tolerances) -> Result<Eigen> {
    let e = eig_unitary(u)?;
    let n = u.nrows();
    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    for cl in eig_clusters(&e.values, tol.eig_cluster) {
        let mean: C64 = cl.iter().map(|&k| e.values[k]).sum::<C64>() / cl.len() as f64;
        let lam = if mean.norm() > 0.0 { mean / mean.norm() } else { e.values[cl[0]] };
        let mut span = CMat::zeros(n, cl.len());
        for (j, &k) in cl.iter().enumerate() {
            span.set_column(j, &e.vectors.column(k));
        }
        let (basis, _) = sparse_basis(&span);
        for j in 0..basis.ncols() {
            values.push(lam);
            cols.push(basis.column(j).iter().cloned().collect());
        }
    }
    let mut vectors = CMat::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            vectors[(i, j)] = c[i];
        }
    }
    Ok(Eigen { values, vectors })
}

pub fn log_unitary(u: &CMat) -> Result<SkewHermitian> {
    log_unitary_with(u, &Tolerances::DEFAULT)
}

pub fn log_unitary_with(u: &CMat, tol: &Tolerances) -> Result<SkewHermitian> {
    check_square(u)?;
    let e = eig_unitary(u)?;
    let n = u.nrows();
    let mut d = DVector::<C64>::zeros(n);
    for (k, z) in e.values.iter().enumerate() {
        let mut phi = z.arg();
        if (phi + PI).abs() <= tol.branch || phi <= -PI {
            log::warn!("eigenphase at the branch cut −π; using +π");
            phi = PI;
        }
        d[k] = C64::new(0.0, phi);
    }
    let a = &e.vectors * CMat::from_diagonal(&d) * e.vectors.adjoint();
    let a = (&a - a.adjoint()).map(|z| z * 0.5);
    Ok(SkewHermitian(a))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_all(ms: &[CMat]) -> CMat {
    ms.iter().fold(identity(1), |acc, m| acc.kronecker(m))
}

/// ⟨↓|U|↓⟩ with the electron as first factor and |↓⟩ its index 0.
pub fn partial_trace_electron(u: &CMat) -> Result<CMat> {
    let q = check_square(u)?;
    if q == 0 {
        return invalid("partial trace needs at least the electron factor");
    }
    let h = u.nrows() / 2;
    Ok(u.view((0, 0), (h, h)).into_owned())
}

/// e^{iθ}A with θ maximizing Re Tr(B† e^{iθ} A).
pub fn global_phase_align(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.shape() != b.shape() {
        return invalid(format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape()));
    }
    let t: C64 = a.iter().zip(b.iter()).map(|(x, y)| y.conj() * x).sum();
    let f = if t.norm() > 0.0 { t.conj() / t.norm() } else { ONE };
    Ok(a.map(|z| z * f))
}

/// Max-norm distance after optimal global phase alignment.
pub fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    match global_phase_align(a, b) {
        Ok(al) => max_norm(&(al - b)),
        Err(_) => f64::INFINITY,
    }
}

/// Nearest unitary (polar factor) M·(M†M)^{−1/2}, through a Hermitian
/// eigendecomposition (nalgebra's complex SVD is not reliable enough here).
pub fn polar_unitary(m: &CMat) -> CMat {
    let (vals, v) = eigh(&(m.adjoint() * m));
    let inv_sqrt = CMat::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(1.0 / l.max(1e-300).sqrt(), 0.0)),
    ));
    m * &v * inv_sqrt * v.adjoint()
}

pub fn det(u: &CMat) -> C64 {
    u.clone().determinant()
}

/// Splits `U = e^{iφ}·S` with `det S = 1`; returns `(S, φ)`.
pub fn su_project(u: &CMat) -> Result<(CMat, f64)> {
    let n = check_square(u)?;
    let d = det(u);
    let phi = d.arg() / (1usize << n) as f64;
    Ok((u.map(|z| z * cis(-phi)), phi))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let z = CMat::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im) / 2f64.sqrt()
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let f = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= f;
        }
    }
    q
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// exp(i c·σ) in closed form.
pub fn su2(c: [f64; 3]) -> CMat {
    let th = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let (s, co) = th.sin_cos();
    let k = if th > 0.0 { s / th } else { 1.0 };
    let (x, y, z) = (c[0] * k, c[1] * k, c[2] * k);
    CMat::from_row_slice(
        2,
        2,
        &[C64::new(co, z), C64::new(y, x), C64::new(-y, x), C64::new(co, -z)],
    )
}

/// Coefficients c with exp(i c·σ) equal to `u` up to global phase, folded to
/// |c| ≤ π/2 (a rotation and its negative differ by a global sign).
pub fn su2_coeffs(u: &CMat) -> [f64; 3] {
    let d = det(u);
    let mut s = u.map(|z| z / d.sqrt());
    if s[(0, 0)].re < 0.0 {
        s = s.map(|z| -z);
    }
    let v = [s[(0, 1)].im, s[(0, 1)].re, s[(0, 0)].im];
    let sn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if sn < 1e-300 {
        return [0.0; 3];
    }
    let th = sn.atan2(s[(0, 0)].re);
    [th * v[0] / sn, th * v[1] / sn, th * v[2] / sn]
}

/// Bit of qubit `q` (qubit 0 most significant) in basis index `idx`.
#[inline]
pub fn qubit_bit(idx: usize, q: usize, n: usize) -> usize {
    (idx >> (n - 1 - q)) & 1
}

/// Embeds a 2×2 operator on qubit `q` of an `n`-qubit register.
pub fn embed_1q(u: &CMat, q: usize, n: usize) -> CMat {
    let left = identity(1 << q);
    let right = identity(1 << (n - 1 - q));
    kron(&kron(&left, u), &right)
}

/// Embeds an operator acting on `qubits` (first listed most significant).
pub fn embed(u: &CMat, qubits: &[usize], n: usize) -> CMat {
    let dim = 1 << n;
    let mut out = CMat::zeros(dim, dim);
    let sub = |idx: usize| -> usize { qubits.iter().fold(0, |acc, &q| (acc << 1) | qubit_bit(idx, q, n)) };
    let mask: usize = qubits.iter().fold(0, |acc, &q| acc | (1 << (n - 1 - q)));
    for r in 0..dim {
        for c in 0..dim {
            if r & !mask != c & !mask {
                continue;
            }
            out[(r, c)] = u[(sub(r), sub(c))];
        }
    }
    out
}

/// Phases on `qubits` expanded to all 2^n basis states.
pub fn expand_phases(phases: &[f64], qubits: &[usize], n: usize) -> Vec<f64> {
    (0..1usize << n)
        .map(|idx| {
            let s = qubits.iter().fold(0, |acc, &q| (acc << 1) | qubit_bit(idx, q, n));
            phases[s]
        })
        .collect()
}

pub fn diag_from_phases(phases: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(phases.len(), phases.iter().map(|&p| cis(p))))
}

/// m ← (u on qubit q)·m, in O(dim²).
pub fn apply_1q_left(m: &mut CMat, u: &CMat, q: usize, n: usize) {
    let stride = 1usize << (n - 1 - q);
    let dim = 1usize << n;
    let (a, b, c, d) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    for r0 in 0..dim {
        if r0 & stride != 0 {
            continue;
        }
        let r1 = r0 | stride;
        for col in 0..m.ncols() {
            let x = m[(r0, col)];
            let y = m[(r1, col)];
            m[(r0, col)] = a * x + b * y;
            m[(r1, col)] = c * x + d * y;
        }
    }
}

/// m ← diag(e^{i·phases})·m.
pub fn apply_diag_left(m: &mut CMat, phases_full: &[f64]) {
    for (r, &p) in phases_full.iter().enumerate() {
        let f = cis(p);
        for col in 0..m.ncols() {
            m[(r, col)] *= f;
        }
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if (y + PI).abs() < 1e-15 {
        y = PI;
    }
    y
}
