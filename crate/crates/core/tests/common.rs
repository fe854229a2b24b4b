#![allow(dead_code)]

use nvq_core::matcore::{random_unitary, CMat, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn haar(dim: usize, seed: u64) -> CMat {
    random_unitary(dim, &mut rng(seed))
}

/// Truncated Taylor series of exp(a), with scaling and squaring.
pub fn expm_series(a: &CMat) -> CMat {
    let n = a.nrows();
    let norm = a.iter().map(|z| z.norm()).sum::<f64>();
    let s = (norm.max(1.0).log2().ceil() as i32 + 1).max(0);
    let scaled = a.map(|z| z / 2f64.powi(s));
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Random Hermitian with entries of order one.
pub fn random_hermitian(dim: usize, seed: u64) -> CMat {
    use rand::Rng;
    let mut r = rng(seed);
    let m = CMat::from_fn(dim, dim, |_, _| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}
