#![allow(dead_code)]
//! Test-side oracles, independent of the crate's own linear algebra.

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C;

pub type M = DMatrix<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn eye(n: usize) -> M {
    M::identity(n, n)
}

pub fn sx() -> M {
    M::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sy() -> M {
    M::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sz() -> M {
    M::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Kronecker product with `a` as the most significant factor.
pub fn kr(a: &M, b: &M) -> M {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    M::from_fn(ar * br, ac * bc, |r, k| a[(r / br, k / bc)] * b[(r % br, k % bc)])
}

pub fn kr_all(ms: &[M]) -> M {
    ms.iter().fold(eye(1), |acc, m| kr(&acc, m))
}

/// Operator `op` on factor `j` of `n` two-level factors.
pub fn on(op: &M, j: usize, n: usize) -> M {
    kr_all(&(0..n).map(|i| if i == j { op.clone() } else { eye(2) }).collect::<Vec<_>>())
}

/// exp(a) by scaling and squaring with a Taylor series.
pub fn expm(a: &M) -> M {
    let norm: f64 = a.iter().map(|z| z.norm()).sum();
    let s = (norm.max(1e-300).log2().ceil() as i32 + 1).max(0);
    let b = a.map(|z| z / 2f64.powi(s));
    let n = a.nrows();
    let mut term = eye(n);
    let mut sum = eye(n);
    for k in 1..30 {
        term = &term * &b / c(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// exp(−iHt)
pub fn evolve(h: &M, t: f64) -> M {
    expm(&h.map(|z| z * c(0.0, -t)))
}

pub fn max_diff(a: &M, b: &M) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// |Tr(A†B)| / dim
pub fn overlap(a: &M, b: &M) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum::<C>().norm() / a.nrows() as f64
}

/// max |A − e^{iφ}B| with the phase taken from the trace overlap.
pub fn diff_up_to_phase(a: &M, b: &M) -> f64 {
    let t: C = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if t.norm() > 0.0 { t / t.norm() } else { c(1.0, 0.0) };
    max_diff(a, &b.map(|z| z * ph))
}
