//! Standard gate matrices (qubit 0 most significant).

use std::f64::consts::FRAC_1_SQRT_2;

use crate::matcore::{cis, identity, su2, C64, CMat, ONE};

/// R_x(ζ) = exp(iζ/2 σ_x).
pub fn rx(zeta: f64) -> CMat {
    su2([zeta / 2.0, 0.0, 0.0])
}

/// R_y(ζ) = exp(iζ/2 σ_y).
pub fn ry(zeta: f64) -> CMat {
    su2([0.0, zeta / 2.0, 0.0])
}

pub fn hadamard() -> CMat {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    CMat::from_row_slice(2, 2, &[h, h, h, -h])
}

/// Control is the first (more significant) qubit.
pub fn cnot() -> CMat {
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn swap() -> CMat {
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

/// diag(1, 1, 1, e^{iφ}).
pub fn cphase(phi: f64) -> CMat {
    let mut m = identity(4);
    m[(3, 3)] = cis(phi);
    m
}

/// Quantum Fourier transform on n qubits without the final qubit reversal,
/// built from H and controlled phases (the swap-free circuit).
pub fn qft_circuit(n: usize) -> CMat {
    use crate::matcore::embed;
    let mut u = identity(1 << n);
    for j in 0..n {
        u = embed(&hadamard(), &[j], n) * u;
        for k in j + 1..n {
            let phi = std::f64::consts::PI / (1u64 << (k - j)) as f64;
            u = embed(&cphase(phi), &[k, j], n) * u;
        }
    }
    u
}

/// Textbook QFT matrix F[j,k] = ω^{jk}/√N.
pub fn qft_matrix(n: usize) -> CMat {
    let d = 1usize << n;
    let s = 1.0 / (d as f64).sqrt();
    CMat::from_fn(d, d, |j, k| {
        let e = ((j * k) % d) as f64;
        cis(2.0 * std::f64::consts::PI * e / d as f64) * s
    })
}
