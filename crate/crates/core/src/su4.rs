//! Two-qubit canonical (magic-basis) decomposition
//! U = K_A · exp(i(a XX + b YY + c ZZ)) · K_B, lowered to native gates.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::gates::{GateSequence, NativeGate};
use crate::matcore::{
    det, kron, max_norm, pauli_x, pauli_y, pauli_z, su2, su2_coeffs, su_project, C64, CMat, I, ONE,
    ZERO,
};

fn magic() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = C64::new(s, 0.0);
    let i = C64::new(0.0, s);
    let z = ZERO;
    // columns: (|00⟩+|11⟩)/√2, i(|00⟩−|11⟩)/√2, i(|01⟩+|10⟩)/√2, (|01⟩−|10⟩)/√2
    CMat::from_row_slice(4, 4, &[r, i, z, z, z, z, i, r, z, z, i, -r, r, -i, z, z])
}

fn pp(p: &CMat) -> CMat {
    kron(p, p)
}

/// exp(i(a XX + b YY + c ZZ)).
pub fn canonical_gate(a: f64, b: f64, c: f64) -> CMat {
    let m = magic();
    let xx = m.adjoint() * pp(&pauli_x()) * &m;
    let yy = m.adjoint() * pp(&pauli_y()) * &m;
    let zz = m.adjoint() * pp(&pauli_z()) * &m;
    let d = CMat::from_fn(4, 4, |r, cc| {
        if r == cc {
            (I * (xx[(r, r)] * a + yy[(r, r)] * b + zz[(r, r)] * c)).exp()
        } else {
            ZERO
        }
    });
    &m * d * m.adjoint()
}

/// A ⊗ B factorization of a 4×4 product of 2×2 unitaries (up to phase).
pub fn factor_kron2(m: &CMat) -> Result<(CMat, CMat)> {
    let mut best = (0, 0);
    let mut bn = -1.0;
    for i in 0..2 {
        for j in 0..2 {
            let n: f64 = (0..2)
                .flat_map(|k| (0..2).map(move |l| (k, l)))
                .map(|(k, l)| m[(2 * i + k, 2 * j + l)].norm_sqr())
                .sum();
            if n > bn {
                bn = n;
                best = (i, j);
            }
        }
    }
    let blk = CMat::from_fn(2, 2, |k, l| m[(2 * best.0 + k, 2 * best.1 + l)]);
    let d = det(&blk);
    if d.norm() < 1e-12 {
        return Err(Error::DecompositionFailure("local factor is singular".into()));
    }
    let b = blk.map(|z| z / d.sqrt());
    let a = CMat::from_fn(2, 2, |i, j| {
        let blk = CMat::from_fn(2, 2, |k, l| m[(2 * i + k, 2 * j + l)]);
        (b.adjoint() * blk).trace() / 2.0
    });
    let res = max_norm(&(kron(&a, &b) - m));
    if res > 1e-7 {
        return Err(Error::DecompositionFailure(format!("not a local operator (residual {res:.2e})")));
    }
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct Su4Decomposition {
    /// Weyl-chamber coefficients with π/4 ≥ a ≥ b ≥ |c|.
    pub coeffs: [f64; 3],
    /// U = e^{iφ} (ka.0 ⊗ ka.1) · exp(i(aXX+bYY+cZZ)) · (kb.0 ⊗ kb.1).
    pub ka: (CMat, CMat),
    pub kb: (CMat, CMat),
    /// Native gates on qubits 0 and 1.
    pub seq: GateSequence,
}

fn real_orthogonal_diagonalizer(m: &CMat) -> Result<DMatrix<f64>> {
    let clean = |x: f64| if x.abs() < 1e-14 { 0.0 } else { x };
    let re = DMatrix::from_fn(4, 4, |r, c| clean((m[(r, c)].re + m[(c, r)].re) / 2.0));
    let im = DMatrix::from_fn(4, 4, |r, c| clean((m[(r, c)].im + m[(c, r)].im) / 2.0));
    for &w in &[0.0, 0.618_033_988_749_894_9, 1.414_213_562_373_095_1, 2.718_281_828, -0.577_215_664_9] {
        let s = &re + &im * w;
        let se = SymmetricEigen::new(s);
        let mut o = se.eigenvectors;
        let oc = o.map(|x| C64::new(x, 0.0));
        let d = oc.transpose() * m * &oc;
        let off = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .fold(0.0f64, |acc, (r, c)| acc.max(d[(r, c)].norm()));
        if off < 1e-9 {
            if o.determinant() < 0.0 {
                for r in 0..4 {
                    o[(r, 0)] = -o[(r, 0)];
                }
            }
            return Ok(o);
        }
    }
    Err(Error::DecompositionFailure("could not diagonalize the magic-basis Gram matrix".into()))
}

struct Tracker {
    coef: [f64; 3],
    left: CMat,
    right: CMat,
}

impl Tracker {
    /// core(a,b,c) = V_l · core(permuted/flipped) · V_r; accumulate.
    fn apply(&mut self, vl: &CMat, vr: &CMat) {
        self.left = &self.left * vl;
        self.right = vr * &self.right;
    }

    fn shift(&mut self, k: usize, m: i64) {
        self.coef[k] -= FRAC_PI_2 * m as f64;
        if m.rem_euclid(2) == 1 {
            let p = [pp(&pauli_x()), pp(&pauli_y()), pp(&pauli_z())][k].clone();
            let id = CMat::identity(4, 4);
            self.apply(&id, &p);
        }
    }

    fn swap(&mut self, i: usize, j: usize) {
        let s = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, I]);
        let h = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, -ONE]).map(|z| z * std::f64::consts::FRAC_1_SQRT_2);
        let rx = su2([FRAC_PI_4, 0.0, 0.0]);
        match (i.min(j), i.max(j)) {
            (0, 1) => {
                let v = pp(&s);
                self.apply(&v.adjoint(), &v);
            }
            (0, 2) => {
                let v = pp(&h);
                self.apply(&v, &v);
            }
            (1, 2) => {
                let v = pp(&rx);
                self.apply(&v.adjoint(), &v);
            }
            _ => unreachable!(),
        }
        self.coef.swap(i, j);
    }

    fn flip(&mut self, i: usize, j: usize) {
        let id = CMat::identity(2, 2);
        let p = match (i.min(j), i.max(j)) {
            (0, 1) => pauli_z(),
            (0, 2) => pauli_y(),
            (1, 2) => pauli_x(),
            _ => unreachable!(),
        };
        let v = kron(&p, &id);
        self.apply(&v, &v);
        self.coef[i] = -self.coef[i];
        self.coef[j] = -self.coef[j];
    }
}

fn canonicalize(t: &mut Tracker) {
    for k in 0..3 {
        // into (−π/4, π/4]
        let m = ((t.coef[k] - FRAC_PI_4) / FRAC_PI_2).ceil() as i64;
        if m != 0 {
            t.shift(k, m);
        }
        if t.coef[k] <= -FRAC_PI_4 + 1e-13 {
            t.shift(k, -1);
        }
    }
    for _ in 0..3 {
        for k in 0..2 {
            if t.coef[k].abs() + 1e-13 < t.coef[k + 1].abs() {
                t.swap(k, k + 1);
            }
        }
    }
    if t.coef[0] < 0.0 && t.coef[1] < 0.0 {
        t.flip(0, 1);
    } else if t.coef[0] < 0.0 {
        t.flip(0, 2);
    } else if t.coef[1] < 0.0 {
        t.flip(1, 2);
    }
}

pub fn su4_canonical_decompose(u: &CMat) -> Result<Su4Decomposition> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return invalid("canonical two-qubit decomposition needs a 4×4 unitary");
    }
    let (s, _) = su_project(u)?;
    let b = magic();
    let up = b.adjoint() * &s * &b;
    let m = up.transpose() * &up;
    let o = real_orthogonal_diagonalizer(&m)?;
    let oc = o.map(|x| C64::new(x, 0.0));
    let d = oc.transpose() * &m * &oc;
    let mut theta: Vec<f64> = (0..4).map(|k| d[(k, k)].arg() / 2.0).collect();
    let kinv = |th: &[f64]| CMat::from_fn(4, 4, |r, c| if r == c { C64::from_polar(1.0, -th[r]) } else { ZERO });
    let mut k1 = &up * &oc * kinv(&theta);
    if det(&k1).re < 0.0 {
        theta[0] += std::f64::consts::PI;
        k1 = &up * &oc * kinv(&theta);
    }
    // θ_k = φ + a·x_k + b·y_k + c·z_k with x,y,z the magic-basis eigenvalues of XX, YY, ZZ
    let xx = b.adjoint() * pp(&pauli_x()) * &b;
    let yy = b.adjoint() * pp(&pauli_y()) * &b;
    let zz = b.adjoint() * pp(&pauli_z()) * &b;
    let a_mat = DMatrix::from_fn(4, 4, |r, c| match c {
        0 => 1.0,
        1 => xx[(r, r)].re,
        2 => yy[(r, r)].re,
        _ => zz[(r, r)].re,
    });
    let rhs = nalgebra::DVector::from_column_slice(&theta);
    let sol = a_mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DecompositionFailure("singular coefficient system".into()))?;
    let ka = &b * &k1 * b.adjoint();
    let kb = &b * oc.transpose() * b.adjoint();

    let mut t = Tracker { coef: [sol[1], sol[2], sol[3]], left: CMat::identity(4, 4), right: CMat::identity(4, 4) };
    canonicalize(&mut t);
    let ka = &ka * &t.left;
    let kb = &t.right * &kb;
    let [a, bb, c] = t.coef;

    let ry_m = kron(&su2([0.0, -FRAC_PI_4, 0.0]), &su2([0.0, -FRAC_PI_4, 0.0]));
    let rx_p = kron(&su2([FRAC_PI_4, 0.0, 0.0]), &su2([FRAC_PI_4, 0.0, 0.0]));
    let zz_gate = |x: f64| NativeGate::diag_raw(vec![0, 1], vec![x, -x, -x, x]);
    let mut gates = vec![];
    let push_local = |gates: &mut Vec<NativeGate>, m: &CMat| -> Result<()> {
        let (l0, l1) = factor_kron2(m)?;
        gates.push(NativeGate::local(0, su2_coeffs(&l0)));
        gates.push(NativeGate::local(1, su2_coeffs(&l1)));
        Ok(())
    };
    // [K_A R1] ZZ_a [R1†] ZZ_c [R2] ZZ_b [R2† K_B] with R1 = Ry(−π/2)⊗², R2 = Rx(π/2)⊗²
    push_local(&mut gates, &(&ka * &ry_m))?;
    gates.push(zz_gate(a));
    push_local(&mut gates, &ry_m.adjoint())?;
    gates.push(zz_gate(c));
    push_local(&mut gates, &rx_p)?;
    gates.push(zz_gate(bb));
    push_local(&mut gates, &(rx_p.adjoint() * &kb))?;

    let (ka0, ka1) = factor_kron2(&ka)?;
    let (kb0, kb1) = factor_kron2(&kb)?;
    Ok(Su4Decomposition {
        coeffs: [a, bb, c],
        ka: (ka0, ka1),
        kb: (kb0, kb1),
        seq: GateSequence { nqubits: 2, gates },
    })
}
