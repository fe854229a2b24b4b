mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use common::*;
use nvq_core::compile::{peephole, xyx_coeffs};
use nvq_core::known;
use nvq_core::matcore::*;
use nvq_core::su4::{canonical_gate, su4_canonical_decompose};
use nvq_core::{recursive_decompose, CompileOptions, GateSequence, NativeGate, Su4Variant};
use proptest::prelude::*;

fn direct() -> CompileOptions {
    CompileOptions { heuristics: false, ..Default::default() }
}

fn check(u: &CMat, opts: &CompileOptions) -> nvq_core::Compiled {
    let c = recursive_decompose(u, opts).unwrap();
    let p = c.native.matrix().map(|z| z * cis(c.global_phase));
    assert!(max_norm(&(p - u)) <= 1e-8, "residual {}", c.residual);
    assert!(phase_distance(&c.seq.matrix(), u) <= 1e-8);
    c
}

#[test]
fn roundtrip_random_unitaries() {
    for n in 1..=4usize {
        for s in 0..200 {
            let u = haar(1 << n, 1000 * n as u64 + s);
            check(&u, &direct());
        }
    }
}

#[test]
fn generic_gate_counts_follow_recursion() {
    // g(1) = 1, g(n) = 4 g(n−1) + 5
    let mut g = 1;
    for n in 1..=4usize {
        let c = check(&haar(1 << n, 77 + n as u64), &direct());
        assert_eq!(c.gate_count(), g, "n = {n}");
        g = 4 * g + 5;
    }
}

#[test]
fn random_eight_dim_within_bound() {
    let c = check(&haar(8, 5), &CompileOptions::default());
    assert!(c.gate_count() <= 41);
}

#[test]
fn cnot_structure() {
    let c = check(&known::cnot(), &direct());
    assert_eq!(c.gate_count(), 4);
    let g = &c.native.gates;
    // K₀ (merged into a diagonal) · R_y(−π/2) · NV₁ · R_y(π/2), matrix order
    let NativeGate::DiagonalPhase { qubits, phases } = &g[0] else { panic!("{:?}", g[0]) };
    let full = expand_phases(phases, qubits, 2);
    let k0 = [0.0, 0.0, -FRAC_PI_2, -FRAC_PI_2];
    assert!(full.iter().zip(k0).all(|(a, b)| wrap_angle(a - b).abs() < 1e-9), "{full:?}");
    assert_eq!(g[1], NativeGate::ry(1, -FRAC_PI_2));
    let NativeGate::DiagonalPhase { qubits, phases } = &g[2] else { panic!() };
    assert_eq!(qubits, &vec![0, 1]);
    let nv1 = [0.0, 0.0, FRAC_PI_2, -FRAC_PI_2];
    assert!(phases.iter().zip(nv1).all(|(a, b)| wrap_angle(a - b).abs() < 1e-9));
    assert_eq!(g[3], NativeGate::ry(1, FRAC_PI_2));
}

#[test]
fn identity_gives_empty_sequence() {
    for n in 1..=4 {
        let c = check(&identity(1 << n), &CompileOptions::default());
        assert!(c.native.is_empty());
    }
}

#[test]
fn swap_main_census() {
    let c = check(&known::swap(), &direct());
    let cen = c.native.census();
    assert_eq!(c.gate_count(), 9);
    assert_eq!(cen.diagonal[2], 3);
    assert_eq!(cen.local, 6);
    // every entangling gate is diag(1, 1, i, −i) up to local z phases:
    // φ00 − φ01 − φ10 + φ11 ≡ π
    for g in &c.native.gates {
        if let NativeGate::DiagonalPhase { phases, .. } = g {
            let ent = phases[0] - phases[1] - phases[2] + phases[3];
            assert!((wrap_angle(ent).abs() - PI).abs() < 1e-9, "{phases:?}");
            assert!(phases.iter().all(|p| (p / FRAC_PI_2 - (p / FRAC_PI_2).round()).abs() < 1e-9));
        }
    }
    // the nuclear rotations are π/3 rotations about body diagonals, i.e. the
    // 2π/(3√3)-per-axis family folded into |c| ≤ π/2
    let a = 2.0 * PI / (3.0 * 3f64.sqrt());
    for g in &c.native.gates {
        if let NativeGate::LocalRotation { coeffs, qubit: 0 } = g {
            let n = coeffs.iter().map(|x| x * x).sum::<f64>().sqrt();
            let axis_like = coeffs.iter().all(|x| (x.abs() - a / 2.0).abs() < 1e-9);
            assert!(axis_like || (n - FRAC_PI_2).abs() < 1e-9, "{coeffs:?}");
        }
    }
}

#[test]
fn lowered_output_has_no_z() {
    let c = check(&haar(8, 3), &direct());
    for g in &c.seq.gates {
        if let NativeGate::LocalRotation { coeffs, .. } = g {
            assert!(coeffs[2].abs() < 1e-10);
        }
    }
}

#[test]
fn diagonal_phases_are_wrapped() {
    let c = check(&haar(16, 8), &direct());
    for g in &c.seq.gates {
        if let NativeGate::DiagonalPhase { phases, .. } = g {
            assert!(phases.iter().all(|p| *p > -PI && *p <= PI));
        }
    }
}

#[test]
fn provenance_is_aligned() {
    let c = check(&haar(8, 4), &direct());
    assert_eq!(c.provenance.len(), c.native.len());
    assert!(c.provenance.iter().all(|p| p.starts_with('U')));
}

#[test]
fn rejects_bad_inputs() {
    assert!(recursive_decompose(&CMat::identity(3, 3), &direct()).is_err());
    let mut m = identity(4);
    m[(0, 1)] = ONE;
    assert!(recursive_decompose(&m, &direct()).is_err());
    assert!(recursive_decompose(&identity(256), &direct()).is_err());
}

#[test]
fn json_roundtrip() {
    let c = check(&haar(4, 1), &direct());
    let s = c.seq.to_json();
    assert!(s.contains("\"kind\": \"local\"") && s.contains("\"kind\": \"diag\""));
    let back = GateSequence::from_json(&s).unwrap();
    assert!(max_norm(&(back.matrix() - c.seq.matrix())) < 1e-14);
    assert!(GateSequence::from_json(r#"{"nqubits":1,"gates":[{"kind":"diag","qubits":[0],"phases":[0.0]}]}"#).is_err());
}

#[test]
fn peephole_merges_diagonals_and_drops_identities() {
    let gates = vec![
        (NativeGate::diag(vec![0, 1], vec![0.0, 0.1, 0.2, 0.3]), "a".to_string()),
        (NativeGate::local(2, [0.0, 0.0, 0.25]), "b".to_string()),
        (NativeGate::local(0, [0.0, 0.0, 0.0]), "c".to_string()),
        (NativeGate::diag(vec![1, 2], vec![0.0, 0.5, 0.0, 0.5]), "d".to_string()),
    ];
    let before: CMat = gates.iter().fold(identity(8), |m, (g, _)| m * g.matrix(3));
    let out = peephole(gates, 1e-10);
    assert_eq!(out.len(), 1);
    let after = out[0].0.matrix(3);
    assert!(phase_distance(&after, &before) < 1e-12);
}

#[test]
fn su4_swap_eleven_gates() {
    let d = su4_canonical_decompose(&known::swap()).unwrap();
    for c in d.coeffs {
        assert!((c - FRAC_PI_4).abs() < 1e-9);
    }
    assert!(phase_distance(&d.seq.matrix(), &known::swap()) < 1e-8);
    let c = check(&known::swap(), &CompileOptions { su4: Su4Variant::Canonical, ..direct() });
    let cen = c.native.census();
    assert_eq!(c.gate_count(), 11);
    assert_eq!((cen.local, cen.diagonal[2]), (8, 3));
}

#[test]
fn su4_cnot_and_local() {
    let d = su4_canonical_decompose(&known::cnot()).unwrap();
    assert!((d.coeffs[0] - FRAC_PI_4).abs() < 1e-9 && d.coeffs[1].abs() < 1e-9 && d.coeffs[2].abs() < 1e-9);
    // recovered generator under recovered locals reproduces CNOT
    let ka = kron(&d.ka.0, &d.ka.1);
    let kb = kron(&d.kb.0, &d.kb.1);
    let rebuilt = ka * canonical_gate(d.coeffs[0], d.coeffs[1], d.coeffs[2]) * kb;
    assert!(phase_distance(&rebuilt, &known::cnot()) < 1e-9);
    let l = kron(&haar(2, 1), &haar(2, 2));
    let d = su4_canonical_decompose(&l).unwrap();
    assert!(d.coeffs.iter().all(|c| c.abs() < 1e-9));
}

#[test]
fn su4_random_in_weyl_chamber() {
    for s in 0..200 {
        let u = haar(4, 500 + s);
        let d = su4_canonical_decompose(&u).unwrap();
        let [a, b, c] = d.coeffs;
        assert!(FRAC_PI_4 + 1e-9 >= a && a + 1e-9 >= b && b + 1e-9 >= c.abs(), "{:?}", d.coeffs);
        assert!(phase_distance(&d.seq.matrix(), &u) < 1e-8);
        let rebuilt = kron(&d.ka.0, &d.ka.1) * canonical_gate(a, b, c) * kron(&d.kb.0, &d.kb.1);
        assert!(phase_distance(&rebuilt, &u) < 1e-8);
    }
}

#[test]
fn su4_rejects_wrong_dimension() {
    assert!(su4_canonical_decompose(&identity(8)).is_err());
}

proptest! {
    #[test]
    fn xyx_reproduces_rotation(cx in -1.5f64..1.5, cy in -1.5f64..1.5, cz in -1.5f64..1.5) {
        let [a, b, c] = xyx_coeffs([cx, cy, cz]);
        let m = su2([a, 0.0, 0.0]) * su2([0.0, b, 0.0]) * su2([c, 0.0, 0.0]);
        prop_assert!(phase_distance(&m, &su2([cx, cy, cz])) < 1e-9);
    }
}

#[test]
fn xyx_of_z_rotation_is_minimal() {
    // R_z(ζ) = R_y(π/2) R_x(ζ) R_y(−π/2) has total x/y weight π/2 + ζ/2
    let [a, b, c] = xyx_coeffs([0.0, 0.0, 0.3]);
    assert!((a.abs() + b.abs() + c.abs()) <= FRAC_PI_2 + 0.3 + 1e-9);
}
