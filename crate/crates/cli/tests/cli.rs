use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qsa_cli::scenario::{encode_instrument, from_file, parse_str, empty_file, ScenarioFile};
use qsa_cli::{parse_scenario, CliError};
use qsa_core::fixtures;
use qsa_core::qsa::seeded_rng;
use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn qsa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsa")).args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = qsa(args);
    let code = out.status.code().expect("exit code");
    let report = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr))
    });
    (code, report)
}

fn write_temp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name} in {report}"))
}

#[test]
fn validate_amplitude_damping() {
    let path = scenario("amplitude_damping");
    let (code, report) = run_json(&["validate", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(report["passed"], true);
    assert!(check(&report, "completeness")["value"].as_f64().unwrap() <= 1e-12);
    assert_eq!(report["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    let digest = report["provenance"]["input_sha256"].as_str().unwrap();
    assert_eq!(digest, qsa_cli::scenario::digest(&std::fs::read(&path).unwrap()));
}

#[test]
fn projective_simulation_frequency() {
    let path = scenario("z_plus_model");
    let (code, report) = run_json(&["simulate", path.to_str().unwrap(), "--shots", "100000", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(report["provenance"]["seed"], 7);
    let plus = report["tables"]["counts"]["+1"].as_f64().unwrap();
    let n = 100_000.0;
    let sigma = (n * 0.25f64).sqrt();
    assert!((plus - n / 2.0).abs() <= 3.0 * sigma, "{plus}");
}

#[test]
fn two_step_simulation_matches_composition() {
    let path = scenario("amplitude_damping_qsr");
    let (code, report) = run_json(&["simulate", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{report}");
    assert!(check(&report, "two_step_3sigma")["passed"].as_bool().unwrap());
    // |1⟩ decays at the first or second step, then stays in |0⟩
    assert_eq!(report["tables"]["two_step"]["(1, 1)"]["count"], 0);
}

#[test]
fn simulation_is_reproducible() {
    let path = scenario("z_plus_model");
    let p = path.to_str().unwrap();
    let a = qsa(&["simulate", p, "--shots", "200", "--steps", "3", "--format", "csv"]);
    let b = qsa(&["simulate", p, "--shots", "200", "--steps", "3", "--format", "csv"]);
    let c = qsa(&["simulate", p, "--shots", "200", "--steps", "3", "--format", "csv", "--seed", "8"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("step,outcome,channel,prob,weight,state_re0,state_re1,state_im0,state_im1")
    );
    assert_eq!(lines.count(), 600);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let path = scenario("amplitude_damping_qsr");
    let status = qsa(&["verify", path.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(status.status.code(), Some(0));
    assert!(status.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["command"], "verify");
    assert_eq!(report["passed"], true);
}

#[test]
fn non_factorizable_sr_is_reported() {
    let path = scenario("dephasing_stochastic");
    let (code, report) = run_json(&["extract-qsr", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(check(&report, "factorizable")["detail"], "NotFactorizable at (0,all)");
}

#[test]
fn invariant_realization_factorizes() {
    let path = scenario("amplitude_damping_realization");
    let (code, report) = run_json(&["extract-qsr", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let measures = &report["tables"]["channel_measures"][0];
    assert!((measures["0"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn remaining_commands_pass_on_examples() {
    for (command, name) in [
        ("dilate", "amplitude_damping"),
        ("invariants", "amplitude_damping_realization"),
        ("invariants", "dephasing_stochastic"),
        ("compare", "dephasing_compare"),
        ("von-neumann", "z_von_neumann"),
        ("verify", "z_plus_model"),
        ("validate", "dephasing_stochastic"),
    ] {
        let path = scenario(name);
        let (code, report) = run_json(&[command, path.to_str().unwrap()]);
        assert_eq!(code, 0, "{command} {name}: {report}");
    }
}

#[test]
fn check_table_as_csv() {
    let path = scenario("z_von_neumann");
    let out = qsa(&["von-neumann", path.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("check,passed,value,tolerance,detail\n"));
    assert!(text.contains("probabilities,true,"));
}

#[test]
fn different_instruments_compare_unequal() {
    let t = fixtures::fix_z();
    let mut file = ScenarioFile {
        instrument: Some(encode_instrument(&t)),
        ..empty_file(2, t.space())
    };
    let swapped = vec![file.instrument.as_ref().unwrap()[1].clone(), file.instrument.as_ref().unwrap()[0].clone()];
    file.compare_with = Some(qsa_cli::scenario::CompareJson {
        measure: None,
        instrument: Some(swapped),
        realization: None,
        stochastic_realization: None,
    });
    let dir = tempfile::tempdir().unwrap();
    let s = from_file(file, None).unwrap();
    let path = write_temp(&dir, "cmp.json", &s.serialize());
    let (code, report) = run_json(&["compare", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(check(&report, "instrument_equal")["passed"], false);
}

#[test]
fn usage_errors_exit_with_two() {
    let ad = scenario("amplitude_damping");
    let out = qsa(&["verify", ad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not accept"));

    let out = qsa(&["compare", ad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("compare_with"));

    let out = qsa(&["validate", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));

    let out = qsa(&["simulate", scenario("z_plus_model").to_str().unwrap(), "--shots", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_unit_trace_density_is_a_trace_violation() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{
        "dim_s": 1,
        "outcomes": ["a"],
        "realization": {
            "state": [[[2.0, 0.0]]],
            "pvm": [[[[1.0, 0.0]]]],
            "unitary": [[[1.0, 0.0]]]
        }
    }"#;
    let path = write_temp(&dir, "trace.json", text);
    match parse_scenario(&path) {
        Err(CliError::Validation { invariant, path, .. }) => {
            assert_eq!(invariant, "trace");
            assert_eq!(path, "realization.state");
        }
        other => panic!("{other:?}"),
    }
    let out = qsa(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(trace)"));
}

#[test]
fn mismatched_matrix_names_the_field() {
    let text = r#"{
        "dim_s": 2,
        "outcomes": ["a"],
        "instrument": [[ [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0]]] ]]
    }"#;
    match parse_str(text, None) {
        Err(CliError::Parse { path, message }) => {
            assert_eq!(path, "instrument[0][0][1]");
            assert!(message.contains("expected 2 columns"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_json_names_the_field() {
    let text = r#"{ "dim_s": 2, "outcomes": ["a"], "instrument": [[ [[[1.0, "x"]]] ]] }"#;
    match parse_str(text, None) {
        Err(CliError::Parse { path, .. }) => assert_eq!(path, "instrument[0][0][0][0][1]"),
        other => panic!("{other:?}"),
    }
    let text = r#"{ "dim_s": 1, "outcomes": ["a"], "instrumnet": [] }"#;
    assert!(matches!(parse_str(text, None), Err(CliError::Parse { .. })));
}

#[test]
fn example_scenarios_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = parse_scenario(&path).unwrap();
        let text = s.serialize();
        let again = parse_str(&text, None).unwrap();
        assert_eq!(again, s, "{}", path.display());
        assert_eq!(again.serialize(), text);
    }
}

fn numbers(v: &Value, out: &mut Vec<u64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap().to_bits()),
        Value::Array(items) => items.iter().for_each(|x| numbers(x, out)),
        Value::Object(map) => map.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

#[test]
fn random_instruments_round_trip_bit_exact() {
    let mut rng = seeded_rng(3);
    for _ in 0..30 {
        let t = fixtures::random_instrument(&mut rng);
        let file = ScenarioFile {
            instrument: Some(encode_instrument(&t)),
            ..empty_file(t.dim(), t.space())
        };
        let s = from_file(file, None).unwrap();
        let again = parse_str(&s.serialize(), None).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        numbers(&serde_json::to_value(&s.file).unwrap(), &mut a);
        numbers(&serde_json::to_value(&again.file).unwrap(), &mut b);
        assert_eq!(a, b);
        assert_eq!(again.payload, s.payload);
    }
}
