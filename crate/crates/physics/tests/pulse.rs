mod common;

use std::f64::consts::PI;

use common::*;
use nvq_core::gates::NativeGate;
use nvq_physics::hardware::h_nv_rwa;
use nvq_physics::pulse::{
    accumulate_level_rotations, compose_rotations, fom, fom_gradient, level_quaternions, local_rotation_pulse,
    needs_split, optimize_entangling_pulse, xyx_coefficients, xyx_decompose, EntanglingOptions,
};
use nvq_physics::sim::radio_nuclei;
use nvq_physics::{AxisAngle, FourierEnvelope, SpinSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// exp(i c·σ) from the Pauli oracles.
fn su2_oracle(cv: [f64; 3]) -> M {
    let th = (cv[0] * cv[0] + cv[1] * cv[1] + cv[2] * cv[2]).sqrt();
    if th == 0.0 {
        return eye(2);
    }
    let g = (sx() * c(cv[0], 0.0) + sy() * c(cv[1], 0.0) + sz() * c(cv[2], 0.0)) / c(th, 0.0);
    eye(2) * c(th.cos(), 0.0) + g * c(0.0, th.sin())
}

fn aa_matrix(r: &AxisAngle) -> M {
    su2_oracle(r.axis.map(|a| a * r.angle / 2.0))
}

fn random_aa(rng: &mut ChaCha8Rng) -> AxisAngle {
    let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    AxisAngle::new(rng.random_range(0.0..2.0 * PI), v)
}

fn to_m(m: &nvq_core::matcore::CMat) -> M {
    M::from_fn(m.nrows(), m.ncols(), |r, k| m[(r, k)])
}

/// ±1 ambiguity of the double cover.
fn diff_up_to_sign(a: &M, b: &M) -> f64 {
    max_diff(a, b).min(max_diff(a, &(-b)))
}

#[test]
fn composition_matches_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (r1, r2) = (random_aa(&mut rng), random_aa(&mut rng));
        let r = compose_rotations(&r1, &r2);
        let m = aa_matrix(&r2) * aa_matrix(&r1);
        assert!(diff_up_to_sign(&aa_matrix(&r), &m) < 1e-9);
        assert!((0.0..=2.0 * PI + 1e-12).contains(&r.angle));
    }
}

#[test]
fn composition_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (a, b, cc) = (random_aa(&mut rng), random_aa(&mut rng), random_aa(&mut rng));
        let l = compose_rotations(&compose_rotations(&a, &b), &cc);
        let r = compose_rotations(&a, &compose_rotations(&b, &cc));
        assert!(diff_up_to_sign(&aa_matrix(&l), &aa_matrix(&r)) < 1e-10);
    }
}

#[test]
fn xyx_exact_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let cv: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let [a, b, d] = xyx_coefficients(cv);
        let m = su2_oracle([a, 0.0, 0.0]) * su2_oracle([0.0, b, 0.0]) * su2_oracle([d, 0.0, 0.0]);
        assert!(max_diff(&m, &su2_oracle(cv)) < 1e-9, "{cv:?}");
        let r = AxisAngle::new(2.0 * (cv[0].powi(2) + cv[1].powi(2) + cv[2].powi(2)).sqrt(), cv);
        let parts = xyx_decompose(&r);
        let prod = aa_matrix(&parts[2]) * aa_matrix(&parts[1]) * aa_matrix(&parts[0]);
        assert!(diff_up_to_sign(&prod, &aa_matrix(&r)) < 1e-9);
        assert!(parts.iter().all(|p| p.axis[2].abs() < 1e-12));
    }
}

#[test]
fn radio_pulse_realizes_y_rotation() {
    let sys = SpinSystem::nv_default(0.5);
    for j in 0..3 {
        for cv in [[0.0, PI / 4.0, 0.0], [PI / 2.0, 0.0, 0.0], [-0.3, 0.2, 0.0]] {
            let s = local_rotation_pulse(&sys, j, cv, 50e-6, 1e-9).unwrap();
            let q = radio_nuclei(&sys, &s.field);
            let got = to_m(&q[j].matrix());
            assert!(overlap(&got, &su2_oracle(cv)) > 0.9995, "nucleus {j} {cv:?}");
            // spectators stay close to the identity (crosstalk is not compensated)
            for k in (0..3).filter(|&k| k != j) {
                assert!(overlap(&to_m(&q[k].matrix()), &eye(2)) > 0.99);
            }
        }
    }
    assert!(local_rotation_pulse(&sys, 0, [0.0, 0.0, 0.5], 10e-6, 1e-9).is_err());
    assert!(local_rotation_pulse(&sys, 3, [0.5, 0.0, 0.0], 10e-6, 1e-9).is_err());
    let s = local_rotation_pulse(&sys, 1, [PI / 2.0, 0.0, 0.0], 10e-6, 1e-9).unwrap();
    assert!((s.duration() - 5e-6).abs() < 1e-12);
}

fn random_envelope(rng: &mut ChaCha8Rng, n: usize, t: f64, amp: f64) -> FourierEnvelope {
    let mut e = FourierEnvelope::zero(n, t);
    for i in 0..n {
        e.a[i] = rng.random_range(-amp..amp);
        e.b[i] = rng.random_range(-amp..amp);
        e.phi[i] = rng.random_range(-PI..PI);
        e.psi[i] = rng.random_range(-PI..PI);
    }
    e
}

fn two_nuclei() -> SpinSystem {
    SpinSystem::nv_default(0.5).truncated(2).unwrap()
}

/// Natural amplitude scale: Rabi rate comparable to the hyperfine splittings.
fn amp_scale(sys: &SpinSystem) -> f64 {
    2.0 * sys.nuclei[0].beta / sys.drive_coupling()
}

#[test]
fn design_model_matches_rwa_expm() {
    let sys = two_nuclei();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tau = 1e-9;
    let env = random_envelope(&mut rng, 4, 0.4e-6, amp_scale(&sys));
    let samples = env.sample(tau);
    let mut u = eye(sys.dim());
    for (k, b) in samples.iter().enumerate() {
        let h = to_m(&h_nv_rwa(&sys, (k as f64 + 0.5) * tau, *b));
        u = evolve(&h, tau) * u;
    }
    let q = level_quaternions(&sys, &env, 0.0, tau);
    let r = accumulate_level_rotations(&sys, &env, 0.0, tau);
    let d = sys.levels();
    for l in 0..d {
        let block = M::from_fn(2, 2, |e, f| u[(e * d + l, f * d + l)]);
        assert!(max_diff(&block, &to_m(&q[l].matrix())) < 1e-9, "level {l}");
        assert!(diff_up_to_sign(&aa_matrix(&r[l]), &block) < 1e-8);
    }
}

#[test]
fn constant_envelope_closed_form() {
    // one level detuned by Δ: U = e^{iΔtσz/2}·exp(−i(κBσx + Δσz/2)t)
    let mut sys = SpinSystem::nv_default(0.5).truncated(1).unwrap();
    sys.nuclei[0].beta = 2.0 * PI * 0.8e6;
    let b = amp_scale(&sys);
    let t: f64 = 1e-6;
    let tau = 0.05e-9;
    let kappa = sys.drive_coupling() / 2.0;
    let steps = (t / tau).round() as usize;
    let model = |delta: f64| {
        let h = (sx() * c(kappa * b, 0.0) + sz() * c(delta / 2.0, 0.0)) * c(1.0, 0.0);
        let frame = su2_oracle([0.0, 0.0, delta * t / 2.0]);
        frame * evolve(&h, t)
    };
    for (l, delta) in [(0usize, -sys.nuclei[0].beta), (1usize, sys.nuclei[0].beta)] {
        let mut u = eye(2);
        for k in 0..steps {
            let h = to_m(&h_nv_rwa(&sys, (k as f64 + 0.5) * tau, b));
            let blk = M::from_fn(2, 2, |e, f| h[(e * 2 + l, f * 2 + l)]);
            u = evolve(&blk, tau) * u;
        }
        assert!(max_diff(&u, &model(delta)) < 1e-5, "level {l}: {}", max_diff(&u, &model(delta)));
    }
}

#[test]
fn accumulation_converges_under_step_halving() {
    let sys = two_nuclei();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let env = random_envelope(&mut rng, 3, 0.5e-6, amp_scale(&sys));
    let at = |tau: f64| -> Vec<M> {
        level_quaternions(&sys, &env, 0.0, tau).iter().map(|q| to_m(&q.matrix())).collect()
    };
    let (r1, r2, r4) = (at(2e-9), at(1e-9), at(0.5e-9));
    let err = |a: &[M], b: &[M]| a.iter().zip(b).map(|(x, y)| max_diff(x, y)).fold(0.0, f64::max);
    let (e1, e2) = (err(&r1, &r2), err(&r2, &r4));
    let order = (e1 / e2).log2();
    assert!(order >= 1.0, "order {order} ({e1:e}, {e2:e})");
}

#[test]
fn fom_trivial_cases() {
    let targets = [0.3, -1.2, 2.0, 0.0];
    let perfect: Vec<AxisAngle> = targets.iter().map(|&t| AxisAngle::new(t, [0.0, 0.0, 1.0])).collect();
    assert!((fom(&perfect, &targets).unwrap() - 1.0).abs() < 1e-12);
    let mut bad = perfect.clone();
    bad[1] = AxisAngle::new(PI / 2.0, [1.0, 0.0, 0.0]);
    let t2 = [0.3, 0.0, 2.0, 0.0];
    assert!(fom(&bad, &t2).unwrap().abs() < 1e-12);
    assert!(fom(&perfect, &targets[..3]).is_err());
}

#[test]
fn fom_direct_formula_and_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let rots: Vec<AxisAngle> = (0..8).map(|_| random_aa(&mut rng)).collect();
        let targets: Vec<f64> = (0..8).map(|_| rng.random_range(-PI..PI)).collect();
        let direct: f64 = rots
            .iter()
            .zip(&targets)
            .map(|(r, t)| {
                let e = r.axis.map(|a| a * r.angle);
                (e[2] - t).cos() * e[0].cos() * e[1].cos()
            })
            .product();
        let f = fom(&rots, &targets).unwrap();
        assert!((f - direct).abs() < 1e-12);
        let mut idx: Vec<usize> = (0..8).collect();
        idx.reverse();
        idx.swap(2, 5);
        let pr: Vec<AxisAngle> = idx.iter().map(|&i| rots[i]).collect();
        let pt: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
        assert!((fom(&pr, &pt).unwrap() - f).abs() < 1e-12);
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let sys = two_nuclei();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let tau = 1e-9;
    let n = 3;
    let amp = amp_scale(&sys) * 0.3;
    let mut checked = 0;
    for _ in 0..20 {
        let env = random_envelope(&mut rng, n, 0.3e-6, amp);
        let det = rng.random_range(-1.0..1.0) * sys.nuclei[0].beta;
        // targets near the realized phases keep the FoM away from zero
        let targets: Vec<f64> = accumulate_level_rotations(&sys, &env, det, tau)
            .iter()
            .map(|r| r.angle * r.axis[2] + rng.random_range(-0.5..0.5))
            .collect();
        let (f0, g) = fom_gradient(&sys, &env, det, tau, &targets);
        assert!(f0.abs() > 1e-3);
        let direct = fom(&accumulate_level_rotations(&sys, &env, det, tau), &targets).unwrap();
        assert!((f0 - direct).abs() < 1e-9);
        let eval = |e: &FourierEnvelope, d: f64| fom_gradient(&sys, e, d, tau, &targets).0;
        let mut fd = vec![0.0; 4 * n + 1];
        for p in 0..4 * n + 1 {
            let h = match p / n {
                0 | 1 => amp * 1e-5,
                2 | 3 => 1e-5,
                _ => sys.nuclei[0].beta * 1e-4,
            };
            let bump = |s: f64| {
                let mut e = env.clone();
                let mut d = det;
                match p / n {
                    0 => e.a[p % n] += s,
                    1 => e.b[p % n] += s,
                    2 => e.phi[p % n] += s,
                    3 => e.psi[p % n] += s,
                    _ => d += s,
                }
                eval(&e, d)
            };
            fd[p] = (bump(h) - bump(-h)) / (2.0 * h);
        }
        // compare in natural units so amplitude, phase and detuning entries weigh alike
        let unit = |p: usize| match p / n {
            0 | 1 => amp,
            2 | 3 => 1.0,
            _ => sys.nuclei[0].beta,
        };
        let gs: Vec<f64> = (0..fd.len()).map(|p| g[p] * unit(p)).collect();
        let fs: Vec<f64> = (0..fd.len()).map(|p| fd[p] * unit(p)).collect();
        let scale = fs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale < 1e-6 {
            continue;
        }
        for p in 0..fd.len() {
            let rel = (gs[p] - fs[p]).abs() / fs[p].abs().max(1e-2 * scale);
            assert!(rel < 1e-5, "param {p}: analytic {} fd {} rel {rel:e}", gs[p], fs[p]);
        }
        checked += 1;
    }
    assert!(checked >= 15);
}

#[test]
fn identity_gate_needs_no_drive() {
    let sys = two_nuclei();
    let g = NativeGate::DiagonalPhase { qubits: vec![0, 1], phases: vec![0.4; 4] };
    let p = optimize_entangling_pulse(&sys, &g, 3e-6, 1, &EntanglingOptions::default()).unwrap();
    assert!(p.envelope.is_zero());
    assert!((p.fom - 1.0).abs() < 1e-12 && p.converged);
    assert!(p.electron_return < 1e-12);
}

#[test]
fn split_rule_for_half_turn_phases() {
    let g = |p: Vec<f64>| NativeGate::DiagonalPhase { qubits: vec![0, 1], phases: p };
    assert!(needs_split(&g(vec![0.0, 0.0, 0.0, PI])));
    assert!(needs_split(&g(vec![PI / 2.0, -PI / 2.0, 0.0, 0.0])));
    assert!(!needs_split(&g(vec![PI / 4.0, -PI / 4.0, -PI / 4.0, PI / 4.0])));
    assert!(!needs_split(&NativeGate::local(0, [0.1, 0.0, 0.0])));
}

#[test]
fn invalid_inputs_rejected() {
    let sys = two_nuclei();
    let g = NativeGate::DiagonalPhase { qubits: vec![0, 1], phases: vec![0.0, 0.1, 0.2, 0.3] };
    assert!(optimize_entangling_pulse(&sys, &g, 0.0, 1, &EntanglingOptions::default()).is_err());
    let g3 = NativeGate::DiagonalPhase { qubits: vec![0, 2], phases: vec![0.0, 0.1, 0.2, 0.3] };
    assert!(optimize_entangling_pulse(&sys, &g3, 3e-6, 1, &EntanglingOptions::default()).is_err());
    let loc = NativeGate::local(0, [0.1, 0.0, 0.0]);
    assert!(optimize_entangling_pulse(&sys, &loc, 3e-6, 1, &EntanglingOptions::default()).is_err());
}
