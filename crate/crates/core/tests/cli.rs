use std::path::PathBuf;
use std::process::Command;

use resilience_kit::cli::{run, EXIT_HYPOTHESIS, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn invoke(args: &[&str]) -> (u8, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("resilience-kit").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = invoke(args);
    assert_eq!(code, EXIT_OK, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"));
    let raw: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&raw).unwrap()
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let s = schema(schema_name);
    let msgs: Vec<String> = match s.validate(doc) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{schema_name} schema rejects output: {msgs:#?}");
}

fn strip_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn check_temperature_worker_split() {
    let doc = json(&["check", "--scenario", "temperature", "--lost", "u_dw_1"]);
    assert_valid("verdict", &doc);
    assert_eq!(doc["verdict"]["resiliently_stabilizable"], true);
    assert_eq!(doc["verdict"]["resilient"], false);
}

#[test]
fn check_admire_thrust_vectoring_loss() {
    let doc = json(&["check", "--scenario", "admire", "--lost", "9"]);
    assert_valid("verdict", &doc);
    assert_eq!(doc["verdict"]["z_empty"], true);
    assert_eq!(doc["verdict"]["z_dim"], "-inf");
    assert_eq!(doc["verdict"]["resiliently_stabilizable"], false);
    assert_eq!(doc["verdict"]["resilient"], false);
}

#[test]
fn check_double_integrator_is_resilient() {
    let doc = json(&["check", "--scenario", "double_integrator", "--lost", "2"]);
    assert_valid("verdict", &doc);
    assert_eq!(doc["verdict"]["resilient"], true);
}

#[test]
fn check_reads_system_files() {
    let (code, text, _) = invoke(&["scenarios", "--show", "double_integrator"]);
    assert_eq!(code, EXIT_OK);
    let file: Value = serde_json::from_str(&text).unwrap();
    assert_valid("scenario", &file);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("di.json");
    std::fs::write(&path, &text).unwrap();
    let doc = json(&["check", "--system", path.to_str().unwrap(), "--lost", "trim"]);
    assert_eq!(doc["verdict"]["resilient"], true);
}

#[test]
fn every_builtin_scenario_matches_the_file_schema() {
    let list = json(&["scenarios"]);
    let names: Vec<String> = list
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"admire".to_string()));
    assert!(names.contains(&"temperature".to_string()));
    for name in names {
        assert_valid("scenario", &json(&["scenarios", "--show", &name]));
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let cases: &[&[&str]] = &[
        &["check", "--scenario", "nope", "--lost", "1"],
        &["check", "--scenario", "temperature", "--lost", "u_missing"],
        &["check", "--scenario", "temperature", "--lost", "99"],
        &["check", "--scenario", "temperature", "--lost", "1", "--format", "csv"],
        &["check", "--scenario", "temperature", "--lost", "1", "--tol-rank", "-1"],
        &["check"],
        &["frobnicate"],
        &["reach", "--scenario", "admire", "--lost", "3", "--horizon", "0.2", "--dims", "3,42"],
        &["reach", "--scenario", "admire", "--lost", "3", "--horizon", "0.2", "--dims", "3"],
        &["reach", "--scenario", "admire", "--lost", "3", "--horizon", "-1"],
        &["reach", "--scenario", "admire", "--lost", "3", "--horizon", "0.2", "--steps", "0"],
        &["bounds", "--scenario", "temperature", "--x0", "1,2"],
    ];
    for args in cases {
        let (code, _, err) = invoke(args);
        assert_eq!(code, EXIT_USAGE, "{args:?}: {err}");
        assert!(!err.is_empty());
    }
}

#[test]
fn empty_z_and_unstable_bounds_exit_with_four() {
    let (code, _, err) = invoke(&["reach", "--scenario", "admire", "--lost", "10", "--horizon", "0.2"]);
    assert_eq!(code, EXIT_HYPOTHESIS);
    assert!(err.contains("Z is empty"), "{err}");
    let (code, _, err) = invoke(&["bounds", "--scenario", "admire", "--lost", "1", "--samples", "3"]);
    assert_eq!(code, EXIT_HYPOTHESIS);
    assert!(err.contains("Hurwitz"), "{err}");
}

#[test]
fn reach_outputs() {
    let args = [
        "reach", "--scenario", "admire", "--lost", "3", "--horizon", "0.2", "--steps", "5", "--dims",
        "roll_angle,roll_rate",
    ];
    let doc = json(&args);
    assert_valid("tube", &doc);
    assert_eq!(doc["polygons"].as_array().unwrap().len(), 5);
    assert_eq!(doc["tube"]["sets"].as_array().unwrap().len(), 6);

    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    let (code, csv, _) = invoke(&csv_args);
    assert_eq!(code, EXIT_OK);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,time,vertex_index,x,y"));
    let steps: std::collections::BTreeSet<u32> = lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols.len(), 5);
            cols[0].parse().unwrap()
        })
        .collect();
    assert_eq!(steps.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);

    let mut svg_args = args.to_vec();
    svg_args.extend(["--format", "svg"]);
    let (code, svg, _) = invoke(&svg_args);
    assert_eq!(code, EXIT_OK);
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<polygon").count(), 5);
}

#[test]
fn single_step_box_polygon() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("box.json");
    std::fs::write(
        &path,
        r#"{"name": "box", "A": [[0, 0], [0, 0]], "B_bar": [[1, 0, 0], [0, 1, 0]]}"#,
    )
    .unwrap();
    let doc = json(&["reach", "--system", path.to_str().unwrap(), "--lost", "3", "--horizon", "1", "--steps", "1"]);
    assert_valid("tube", &doc);
    let polys = doc["polygons"].as_array().unwrap();
    assert_eq!(polys.len(), 1);
    let mut verts: Vec<(f64, f64)> = polys[0]["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| (v[0].as_f64().unwrap(), v[1].as_f64().unwrap()))
        .collect();
    verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(verts, vec![(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]);
}

#[test]
fn bounds_document_is_valid_and_deterministic() {
    let args = [
        "bounds", "--scenario", "temperature", "--lost", "u_dw_1", "--samples", "50", "--seed", "9", "--oracle",
        "--dt", "2",
    ];
    let first = json(&args);
    assert_valid("bounds", &first);
    let second = json(&args);
    assert_eq!(strip_timestamp(first.clone()), strip_timestamp(second));
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "2"]);
    assert_eq!(strip_timestamp(first.clone()), strip_timestamp(json(&threaded)));

    let other = json(&[
        "bounds", "--scenario", "temperature", "--lost", "u_dw_1", "--samples", "50", "--seed", "10",
    ]);
    assert_ne!(first["report"]["sources"][0], other["report"]["sources"][0]);
}

#[test]
fn zero_state_gives_degenerate_intervals() {
    let doc = json(&[
        "bounds", "--scenario", "temperature", "--lost", "u_hAC", "--samples", "5", "--x0", "0,0,0",
    ]);
    assert_valid("bounds", &doc);
    for key in ["t_n", "t_m"] {
        assert_eq!(doc["report"][key]["lower"], 0.0);
        assert_eq!(doc["report"][key]["upper"], 0.0);
    }
}

#[test]
fn output_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("verdict.json");
    let (code, out, _) = invoke(&[
        "check", "--scenario", "temperature", "--lost", "u_hAC", "--output", path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_valid("verdict", &doc);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn binary_exit_codes_and_seed_env() {
    let bin = env!("CARGO_BIN_EXE_resilience-kit");
    let status = Command::new(bin).args(["check", "--scenario", "nope"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(bin)
        .args(["reach", "--scenario", "admire", "--lost", "9", "--horizon", "0.2"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));

    let base = ["bounds", "--scenario", "temperature", "--lost", "u_hAC", "--samples", "20"];
    let via_env = Command::new(bin).args(base).env("RESILIENCE_KIT_SEED", "77").output().unwrap();
    let mut flag_args = base.to_vec();
    flag_args.extend(["--seed", "77"]);
    let via_flag = Command::new(bin).args(&flag_args).env_remove("RESILIENCE_KIT_SEED").output().unwrap();
    assert_eq!(via_env.status.code(), Some(0));
    let a: Value = serde_json::from_slice(&via_env.stdout).unwrap();
    let b: Value = serde_json::from_slice(&via_flag.stdout).unwrap();
    assert_eq!(a["seed"], 77);
    assert_eq!(strip_timestamp(a), strip_timestamp(b));
}
