mod common;

use std::f64::consts::{PI, SQRT_2};

use common::*;
use nvq_physics::hardware::{h_nv, h_nv_rwa, h_sq, DEFAULT_B0};
use nvq_physics::{DriveField, ElectronKind, SpinSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MHZ: f64 = 2.0 * PI * 1e6;

fn field(carrier: f64, amp: f64, phase: f64, steps: usize) -> DriveField {
    DriveField { carrier, envelope: vec![amp; steps], phase, tau: 1e-9, t0: 0.0 }
}

fn hermitian_err(h: &M) -> f64 {
    max_diff(h, &h.adjoint())
}

#[test]
fn level_frequencies_reproduce_pair_table() {
    let sys = SpinSystem::nv_default(DEFAULT_B0).truncated(2).unwrap();
    let (bi, bj) = (sys.nuclei[0].beta, sys.nuclei[1].beta);
    let wel = sys.omega_el();
    let offsets = [-bi - bj, -bi + bj, bi - bj, bi + bj];
    for (l, o) in offsets.iter().enumerate() {
        let w = sys.level_frequency(l).unwrap();
        assert_eq!(w, *o, "level {l}");
        assert!(((w + wel) - (wel + o)).abs() <= 1e-15 * wel.abs());
    }
    assert!(sys.level_frequency(4).is_err());
}

#[test]
fn level_frequencies_flip_antisymmetric() {
    let sys = SpinSystem::nv_default(0.5);
    let n = sys.levels();
    for l in 0..n {
        let a = sys.level_frequency(l).unwrap();
        let b = sys.level_frequency(n - 1 - l).unwrap();
        assert!((a + b).abs() < 1e-9);
    }
    let mut zero = sys.clone();
    zero.nuclei.iter_mut().for_each(|n| n.beta = 0.0);
    assert!(zero.level_frequencies().iter().all(|w| *w == 0.0));
}

#[test]
fn group_iv_half_parity() {
    let mut sys = SpinSystem::group4_template(0.5);
    sys.nuclei[0].beta = 0.7 * MHZ;
    sys.nuclei[1].beta = 0.3 * MHZ;
    let w = sys.level_frequency(0b01).unwrap();
    assert!((w - (-0.7 + 0.3) / 2.0 * MHZ).abs() < 1e-6);
    assert_eq!(sys.electron_kind, ElectronKind::GroupIv);
    assert!((sys.drive_coupling() - sys.gamma_nv / 2.0).abs() < 1e-3);
}

/// −Σ_j γ_j B₁(t)(I_x cos ω_j t + I_y sin ω_j t), built from Kronecker products.
fn h_sq_oracle(sys: &SpinSystem, t: f64, f: &DriveField) -> M {
    let n = sys.n();
    let b1 = f.envelope_at(t) * (f.carrier * t + f.phase).cos();
    let mut h = M::zeros(1 << n, 1 << n);
    for j in 0..n {
        let w = sys.nuclear_frequency(j) * t;
        let ix = on(&sx(), j, n).map(|z| z * 0.5);
        let iy = on(&sy(), j, n).map(|z| z * 0.5);
        h -= (ix * c(w.cos(), 0.0) + iy * c(w.sin(), 0.0)) * c(sys.nuclei[j].gamma * b1, 0.0);
    }
    kr(&eye(2), &h)
}

/// Electron raising/lowering parts times diagonal level phases e^{±i(ω_el + Ω)t},
/// Ω = Σ_j β_j·(−σz_j) for the NV parity convention.
fn h_nv_oracle(sys: &SpinSystem, t: f64, f: &DriveField) -> M {
    let n = sys.n();
    let b1 = f.envelope_at(t) * (f.carrier * t + f.phase).cos();
    let k = sys.gamma_nv / SQRT_2 * b1;
    let mut omega = M::zeros(1 << n, 1 << n);
    for j in 0..n {
        omega -= on(&sz(), j, n) * c(sys.nuclei[j].beta, 0.0);
    }
    let e = M::from_diagonal(&omega.diagonal().map(|w| C::from_polar(1.0, (sys.omega_el() + w.re) * t)));
    let splus = M::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
    (kr(&splus, &e) + kr(&splus.transpose(), &e.adjoint())) * c(k, 0.0)
}

#[test]
fn h_sq_matches_kron_construction() {
    let sys = SpinSystem::nv_default(0.5);
    let f = field(sys.nuclear_frequency(0), 1e-3, 0.3, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let t = rng.random_range(0.0..f.duration());
        let h = h_sq(&sys, t, &f).unwrap();
        let o = h_sq_oracle(&sys, t, &f);
        let scale = o.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max_diff(&h, &o) < 1e-12 * scale.max(1.0));
        assert!(hermitian_err(&h) < 1e-12 * scale.max(1.0));
    }
}

#[test]
fn h_sq_single_nucleus_at_zero() {
    let sys = SpinSystem::nv_default(0.5).truncated(1).unwrap();
    let amp = 2e-3;
    let f = field(sys.nuclear_frequency(0), amp, 0.0, 10);
    let h = h_sq(&sys, 0.0, &f).unwrap();
    let expect = kr(&eye(2), &sx().map(|z| z * (-0.5 * sys.nuclei[0].gamma * amp)));
    assert!(max_diff(&h, &expect) < 1e-9);
    let zero = field(1.0, 0.0, 0.0, 10);
    assert!(h_sq(&sys, 5e-9, &zero).unwrap().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn h_nv_matches_projector_construction() {
    let sys = SpinSystem::nv_default(0.5).truncated(2).unwrap();
    let f = field(sys.omega_el(), 1e-6, 0.0, 2000);
    for &t in &[0.0, 1e-6, 3.7e-7, 1.9999e-6] {
        let h = h_nv(&sys, t, &f).unwrap();
        let o = h_nv_oracle(&sys, t, &f);
        let scale = o.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        assert!(max_diff(&h, &o) < 1e-12 * scale, "t = {t}");
        assert!(hermitian_err(&h) < 1e-12 * scale);
    }
    let sys3 = SpinSystem::nv_default(0.5);
    let h = h_nv(&sys3, 1.234e-6, &f).unwrap();
    assert!(max_diff(&h, &h_nv_oracle(&sys3, 1.234e-6, &f)) < 1e-12 * h.norm());
}

#[test]
fn h_nv_at_zero_is_sigma_x() {
    let sys = SpinSystem::nv_default(0.5).truncated(2).unwrap();
    let amp = 1e-6;
    let f = field(sys.omega_el(), amp, 0.0, 10);
    let h = h_nv(&sys, 0.0, &f).unwrap();
    let expect = kr(&sx(), &eye(4)).map(|z| z * (sys.gamma_nv / SQRT_2 * amp));
    assert!(max_diff(&h, &expect) < 1e-6);
    assert!(h_nv(&sys, 0.0, &field(1.0, 0.0, 0.0, 10)).unwrap().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn rwa_single_level_is_scaled_sigma_x() {
    let mut sys = SpinSystem::nv_default(0.5).truncated(1).unwrap();
    sys.nuclei[0].beta = 0.0;
    let h = h_nv_rwa(&sys, 0.7e-6, 2e-6);
    let expect = kr(&sx(), &eye(2)).map(|z| z * (sys.gamma_nv / (2.0 * SQRT_2) * 2e-6));
    assert!(max_diff(&h, &expect) < 1e-9);
    assert!(h_nv_rwa(&sys, 1e-6, 0.0).iter().all(|z| z.norm() == 0.0));
}

#[test]
fn time_outside_pulse_rejected() {
    let sys = SpinSystem::nv_default(0.5);
    let f = field(1.0, 1e-3, 0.0, 10);
    assert!(h_sq(&sys, 11e-9, &f).is_err());
    assert!(h_nv(&sys, -1e-12, &f).is_err());
    assert!(h_sq(&sys, 10e-9, &f).is_ok());
}

#[test]
fn bundled_presets_load() {
    let t2 = SpinSystem::preset("table2-nv").unwrap();
    let baked = SpinSystem::nv_default(0.5);
    assert_eq!(t2.nuclei.len(), 3);
    assert!((t2.d - baked.d).abs() < 1e-3);
    assert!((t2.gamma_nv - baked.gamma_nv).abs() < 1e-3);
    for (a, b) in t2.nuclei.iter().zip(&baked.nuclei) {
        assert_eq!(a.label, b.label);
        assert!((a.gamma - b.gamma).abs() < 1e-6 && (a.beta - b.beta).abs() < 1e-6);
    }
    let g4 = SpinSystem::preset("group4-template").unwrap();
    assert_eq!(g4.electron_kind, ElectronKind::GroupIv);
    assert!(SpinSystem::preset("/nonexistent/preset.json").is_err());
}

#[test]
fn preset_round_trip_and_units() {
    let sys = SpinSystem::nv_default(0.31);
    let back = SpinSystem::from_preset_json(&sys.to_preset_json()).unwrap();
    assert!((back.b0 - 0.31).abs() < 1e-15);
    for (a, b) in back.nuclei.iter().zip(&sys.nuclei) {
        assert!((a.beta - b.beta).abs() < 1e-6);
    }
    let j = r#"{"electron_kind":"nv","D":{"value":2870,"unit":"MHz"},
        "gamma_nv":{"value":28024,"unit":"MHz/T"},"B0":{"value":500,"unit":"mT"},
        "nuclei":[{"label":"x","gamma":{"value":1e3,"unit":"kHz/T"},"beta":{"value":6.283185307179586e6,"unit":"rad/s"}}]}"#;
    let s = SpinSystem::from_preset_json(j).unwrap();
    assert!((s.b0 - 0.5).abs() < 1e-15);
    assert!((s.d - 2.0 * PI * 2.87e9).abs() < 1.0);
    assert!((s.nuclei[0].gamma - 2.0 * PI * 1e6).abs() < 1e-6);
    assert!((s.nuclei[0].beta - MHZ).abs() < 1e-6);
    // the zero-field term quoted per tesla is accepted as a frequency
    let per_t = j.replace(r#""value":2870,"unit":"MHz""#, r#""value":2.87,"unit":"GHz/T""#);
    assert!((SpinSystem::from_preset_json(&per_t).unwrap().d - s.d).abs() < 1.0);
    let bad = j.replace("mT", "furlong");
    assert!(SpinSystem::from_preset_json(&bad).is_err());
    let missing = j.replace(r#","unit":"mT""#, "");
    assert!(SpinSystem::from_preset_json(&missing).is_err());
}

#[test]
fn regime_warnings() {
    // ¹⁵N and ¹³C₁ transitions cross near 0.137 T
    let b = 2.05 / 15.028;
    let sys = SpinSystem::nv_default(b);
    assert!(sys.warnings().iter().any(|w| w.contains("apart")));
    assert!(SpinSystem::nv_default(0.5).warnings().iter().all(|w| !w.contains("apart")));
    let mut bad = SpinSystem::nv_default(0.5);
    bad.b0 = f64::NAN;
    assert!(bad.validate().is_err());
}
