use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nvq_cli::parse_sweep;
use nvq_core::matcore::{identity, random_unitary};
use nvq_physics::sim::matrix_to_rows;
use rand::SeedableRng;
use serde_json::Value;

fn nvq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvq")).args(args).current_dir(dir).env("RUST_LOG", "error").output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

const CNOT: &str = r#"{"nqubits":2,"gates":[{"name":"cnot","qubits":[0,1]}]}"#;
const SWAP: &str = r#"{"nqubits":2,"gates":[{"name":"swap","qubits":[0,1]}]}"#;

#[test]
fn compile_cnot_is_four_gates_and_deterministic() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "cnot.json", CNOT);
    for out in ["a.json", "b.json"] {
        let o = nvq(&["compile", "--in", "cnot.json", "--out", out, "--heuristics", "off"], d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let r = json(&d.path().join("a.json"));
    assert_eq!(r["gate_count"], 4);
    assert!(r["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["provenance"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read(d.path().join("a.json")).unwrap(), fs::read(d.path().join("b.json")).unwrap());
}

#[test]
fn compile_identity_and_random_unitaries() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "id.json", &serde_json::to_string(&matrix_to_rows(&identity(8))).unwrap());
    let o = nvq(&["compile", "--in", "id.json", "--out", "id_out.json"], d.path());
    assert!(o.status.success());
    assert_eq!(json(&d.path().join("id_out.json"))["sequence"]["gates"].as_array().unwrap().len(), 0);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(16);
    let u = random_unitary(16, &mut rng);
    write(d.path(), "u.json", &serde_json::to_string(&matrix_to_rows(&u)).unwrap());
    let o = nvq(&["compile", "--in", "u.json", "--out", "u_out.json"], d.path());
    assert!(o.status.success());
    let r = json(&d.path().join("u_out.json"));
    assert!(r["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(r["nqubits"], 4);
}

#[test]
fn bad_inputs_exit_with_error() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.json", r#"{"nqubits":2,"gates":[{"name":"toffoli","qubits":[0,1]}]}"#);
    write(d.path(), "nonunitary.json", "[[[1,0],[1,0]],[[0,0],[1,0]]]");
    for f in ["bad.json", "nonunitary.json", "missing.json"] {
        let o = nvq(&["compile", "--in", f], d.path());
        assert_eq!(o.status.code(), Some(2), "{f}");
    }
    write(d.path(), "cnot.json", CNOT);
    let o = nvq(&["compile", "--in", "cnot.json", "--tn-us", "-1"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let o = nvq(&["compile", "--in", "cnot.json", "--nfreq", "0"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_wins_over_flags() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "swap.json", SWAP);
    write(d.path(), "cfg.toml", "su4-variant = \"canonical\"\nheuristics = \"off\"\n");
    let o = nvq(
        &["compile", "--in", "swap.json", "--out", "s.json", "--su4-variant", "main", "--config", "cfg.toml"],
        d.path(),
    );
    assert!(o.status.success());
    assert_eq!(json(&d.path().join("s.json"))["gate_count"], 11);
    let o = nvq(&["compile", "--in", "swap.json", "--out", "m.json", "--heuristics", "off"], d.path());
    assert!(o.status.success());
    assert_eq!(json(&d.path().join("m.json"))["gate_count"], 9);
    write(d.path(), "typo.toml", "tn = 3\n");
    let o = nvq(&["compile", "--in", "swap.json", "--config", "typo.toml"], d.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cnot_pulse_then_simulate() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "cnot.json", CNOT);
    assert!(nvq(&["compile", "--in", "cnot.json", "--out", "c.json", "--heuristics", "off"], d.path()).status.success());
    let o = nvq(&["pulse", "--in", "c.json", "--out", "p"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p = json(&d.path().join("p/pulse_report.json"));
    assert_eq!((p["microwave_pulses"].as_u64(), p["radio_pulses"].as_u64()), (Some(2), Some(2)));
    assert!(d.path().join("p/schedules/000_radio_q1.csv").exists());

    for out in ["s1", "s2"] {
        let o = nvq(&["simulate", "--in", "c.json", "--out", out, "--library", "p/library", "--initial", "0,3"], d.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(d.path().join("s1/simulate_report.json")).unwrap();
    assert_eq!(a, fs::read(d.path().join("s2/simulate_report.json")).unwrap());
    let r = json(&d.path().join("s1/simulate_report.json"));
    assert!(r["fidelity"].as_f64().unwrap() >= 0.999);
    assert_eq!(r["reference"]["circuit"], "cnot");
    assert_eq!(r["reference"]["fidelity"], 0.99992);
    let csv = fs::read_to_string(d.path().join("s1/populations_3.csv")).unwrap();
    assert!(csv.starts_with("t_ns,"));
    assert_eq!(
        fs::read(d.path().join("s1/populations_0.csv")).unwrap(),
        fs::read(d.path().join("s2/populations_0.csv")).unwrap()
    );

    // an impossible threshold flips the exit status only
    let o = nvq(&["simulate", "--in", "c.json", "--out", "s3", "--library", "p/library", "--min-fidelity", "1.1"], d.path());
    assert_eq!(o.status.code(), Some(1));

    // simulate never optimizes: an empty library is a hard error naming the gate
    fs::create_dir_all(d.path().join("empty")).unwrap();
    let o = nvq(&["simulate", "--in", "c.json", "--out", "s4", "--library", "empty"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("DiagonalPhase"));
}

#[test]
fn empty_sequence_pipeline() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "id.json", &serde_json::to_string(&matrix_to_rows(&identity(4))).unwrap());
    assert!(nvq(&["compile", "--in", "id.json", "--out", "c.json"], d.path()).status.success());
    assert!(nvq(&["pulse", "--in", "c.json", "--out", "p"], d.path()).status.success());
    assert_eq!(json(&d.path().join("p/pulse_report.json"))["library_entries"], 0);
    assert!(nvq(&["simulate", "--in", "c.json", "--out", "s", "--library", "p/library"], d.path()).status.success());
    assert!((json(&d.path().join("s/simulate_report.json"))["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn swap_pulses_share_the_cache() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "swap.json", SWAP);
    let o = nvq(&["pulse", "--in", "swap.json", "--out", "p", "--heuristics", "off", "--tn-us", "50"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p = json(&d.path().join("p/pulse_report.json"));
    assert_eq!(p["microwave_pulses"], 3);
    assert!(p["library_entries"].as_u64().unwrap() < 3);
}

#[test]
fn swap_variant_simulation() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "swap.json", SWAP);
    let args = ["--in", "swap.json", "--heuristics", "off", "--su4-variant", "canonical", "--tn-us", "25"];
    assert!(nvq(&[&["pulse", "--out", "p"][..], &args].concat(), d.path()).status.success());
    let o = nvq(&[&["simulate", "--out", "s", "--library", "p/library"][..], &args].concat(), d.path());
    assert!(o.status.success());
    let r = json(&d.path().join("s/simulate_report.json"));
    assert!(r["fidelity"].as_f64().unwrap() >= 0.98);
    assert_eq!(r["reference"]["circuit"], "swap-variant");
}

#[test]
fn sweep_writes_table() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "cnot.json", CNOT);
    let o = nvq(&["sweep", "--in", "cnot.json", "--out", "w", "--sweep-tn", "10:20:5", "--heuristics", "off"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("w/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let rows = json(&d.path().join("w/sweep.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["fidelity"].as_f64().unwrap() > 0.99));
}

#[test]
fn sweep_spec_parsing() {
    assert_eq!(parse_sweep("20:50:10").unwrap(), vec![20.0, 30.0, 40.0, 50.0]);
    assert_eq!(parse_sweep("25:25:1").unwrap(), vec![25.0]);
    assert!(parse_sweep("20:50").is_err());
    assert!(parse_sweep("50:20:10").is_err());
    assert!(parse_sweep("20:50:0").is_err());
}

#[test]
fn bench_writes_scaling_and_fixtures() {
    let d = tempfile::tempdir().unwrap();
    let o = nvq(&["bench", "--out", "b", "--trials", "1", "--heuristics", "off"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("b/scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16);
    let r = json(&d.path().join("b/bench_report.json"));
    assert_eq!(r["fixtures"].as_array().unwrap().len(), 2);
    assert_eq!(r["fixtures"][0]["passed"], true);
}
