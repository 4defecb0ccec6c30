use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use lindblad_steady::io::{self, ModelDocument, StateDocument};
use lindblad_steady::models::{self, TwoEnsemble};
use lindblad_steady::state::trace_distance;
use serde_json::Value;

fn presets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn model(name: &str) -> PathBuf {
    presets().join("models").join(format!("{name}.json"))
}

fn state(name: &str) -> PathBuf {
    presets().join("states").join(format!("{name}.json"))
}

fn lss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lss")).args(args).env_remove("LSS_OUTPUT_DIR").output().expect("spawn lss")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn preset_files_match_library_models() {
    let e = TwoEnsemble::balanced(4).unwrap();
    let cases = [
        ("two_qubit_balanced", models::two_qubit_balanced(1.0).unwrap()),
        ("two_qubit_single_decay", models::two_qubit_single_decay(1.0).unwrap()),
        ("two_qubit_driven", models::two_qubit_driven(1.0, 1.0).unwrap()),
        ("two_ensemble_n4_decay", e.decay_model(1.0).unwrap()),
        ("two_ensemble_n4_balanced", e.balanced_model(1.0).unwrap()),
    ];
    for (name, reference) in cases {
        let loaded = io::read_model(&model(name)).unwrap();
        assert_eq!(loaded.dim(), reference.dim());
        assert!((loaded.hamiltonian() - reference.hamiltonian()).max_abs() < 1e-14, "{name}");
        for (a, b) in loaded.jumps().iter().zip(reference.jumps()) {
            assert_eq!(a.rate, b.rate);
            assert!((&a.operator - &b.operator).max_abs() < 1e-14, "{name}");
        }
    }
    let psi = io::read_state(&state("two_ensemble_n4_psi_dif")).unwrap();
    assert!(trace_distance(&psi, &e.psi_dif(false)).unwrap() < 1e-14);
    for name in ["up_up", "phi_minus", "phi_plus"] {
        assert!(io::read_state(&state(name)).unwrap().validity().unwrap().is_valid());
    }
}

#[test]
fn solve_fixed_point_and_method_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ss.json");
    let o = lss(&["solve", "--model", s(&model("two_qubit_balanced")), "--state", s(&state("phi_minus")), "--method", "hermitian", "-o", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("n=2"));
    let rho = io::read_state(&out).unwrap();
    let phi = io::read_state(&state("phi_minus")).unwrap();
    assert!(trace_distance(&rho, &phi).unwrap() < 1e-10);

    let herm = dir.path().join("h.json");
    let res = dir.path().join("r.json");
    let up = state("up_up");
    assert!(lss(&["solve", "--model", s(&model("two_qubit_balanced")), "--state", s(&up), "--method", "hermitian", "-o", s(&herm)]).status.success());
    // the resolvent error is about ε/gap with a gap near 3.6
    for (eps, bound) in [("1e-4", 1e-4), ("1e-5", 1e-5)] {
        let o = lss(&["solve", "--model", s(&model("two_qubit_balanced")), "--state", s(&up), "--method", "resolvent", "--epsilon", eps, "-o", s(&res)]);
        assert!(o.status.success(), "{o:?}");
        let d = trace_distance(&io::read_state(&herm).unwrap(), &io::read_state(&res).unwrap()).unwrap();
        assert!(d < bound, "ε = {eps}: {d}");
    }
}

#[test]
fn solved_state_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ss.json");
    let o = lss(&["solve", "--model", s(&model("two_qubit_driven")), "--state", s(&state("up_up")), "--method", "resolvent", "-o", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"schema_version\": 1"));
    let doc: StateDocument = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&StateDocument::from_matrix(&doc.matrix().unwrap())).unwrap();
    assert_eq!(text.trim_end(), again);
}

#[test]
fn malformed_input_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = dir.path().join("ss.json");
    let o = lss(&["solve", "--model", s(&bad), "--state", s(&state("up_up")), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = lss(&["solve", "--model", s(&model("two_qubit_balanced")), "--state", s(&state("up_up")), "--bogus", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let o = lss(&["solve", "--model", s(&model("two_ensemble_n4_decay")), "--state", s(&state("up_up")), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ss.json");
    let o = lss(&["solve", "--model", s(&model("two_qubit_single_decay")), "--state", s(&state("up_up")), "--method", "hermitian", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Hermitian"));
    assert!(!out.exists());
}

#[test]
fn kernel_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    for (name, n) in [("two_qubit_single_decay", 4), ("two_qubit_balanced", 2), ("two_ensemble_n4_balanced", 3)] {
        let out = dir.path().join(format!("{name}.json"));
        let o = lss(&["kernel", "--model", s(&model(name)), "-o", s(&out)]);
        assert!(o.status.success(), "{o:?}");
        let doc = json(&out);
        assert_eq!(doc["schema_version"], 1);
        assert_eq!(doc["n"], n, "{name}");
        assert_eq!(doc["right"].as_array().unwrap().len(), n);
        assert_eq!(doc["left"].as_array().unwrap().len(), n);
        assert!(doc["biorthogonality_residual"].as_f64().unwrap() <= 1e-10);
    }
}

#[test]
fn scenario_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    let o = lss(&["scenario", "two_qubit_balanced", "--samples", "300", "--seed", "7", "--out-dir", d]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("two_qubit_balanced: PASS"));
    let csv = std::fs::read_to_string(dir.path().join("two_qubit_balanced_7.csv")).unwrap();
    assert_eq!(csv.lines().count(), 301);
    let summary = json(&dir.path().join("two_qubit_balanced_7.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["config"]["samples"], 300);

    let o = lss(&["scenario", "balanced_protocol", "--N", "4", "--out-dir", d]);
    assert!(o.status.success(), "{o:?}");
    let f = json(&dir.path().join("balanced_protocol_7.json"))["metrics"]["f_pro"].as_f64().unwrap();
    assert!((f - 8.0).abs() < 8e-8, "{f}");

    let o = lss(&["scenario", "two_ensemble_decay", "--N", "20", "--eta", "4", "--out-dir", d]);
    assert!(o.status.success(), "{o:?}");
    let m = json(&dir.path().join("two_ensemble_decay_7.json"));
    assert_eq!(m["metrics"]["support_start"], 4.0);
}

#[test]
fn scenario_output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_lss"))
        .args(["scenario", "two_qubit_single_decay", "--samples", "5", "--seed", "3", "--format", "csv"])
        .env("LSS_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("two_qubit_single_decay_3.csv").exists());
    assert!(stdout(&o).starts_with("c2_tilde,"));
}

#[test]
fn unknown_scenario_lists_names() {
    let o = lss(&["scenario", "nonexistent"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in lindblad_steady::scenarios::SCENARIOS {
        assert!(err.contains(name));
    }
}

#[test]
fn bench_single_row_is_fast_and_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let o = lss(&["bench", "--N", "4", "--repeats", "3", "--out-dir", s(dir.path())]);
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(o.status.success(), "{o:?}");
    assert!(elapsed < 5.0, "{elapsed} s");
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    for col in ["error_direct_vs_ode", "error_iterative_vs_ode", "error_direct_vs_iterative"] {
        let k = header.iter().position(|h| *h == col).unwrap();
        assert!(row[k] <= 1e-5, "{col} = {}", row[k]);
    }
    assert!(dir.path().join("benchmark_7.csv").exists());
}

#[test]
fn sample_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert!(lss(&["sample", "--dim", "4", "--count", "3", "--seed", "11", "-o", s(p)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let docs: Vec<StateDocument> = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(docs.len(), 3);
    assert!(docs.iter().all(|d| d.to_state().unwrap().validity().unwrap().is_valid()));
    let o = lss(&["sample", "--dim", "1", "-o", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn model_document_schema_is_versioned() {
    let text = std::fs::read_to_string(model("two_qubit_balanced")).unwrap();
    let doc: ModelDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.schema_version, io::SCHEMA_VERSION);
}
