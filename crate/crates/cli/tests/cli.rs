use std::path::PathBuf;
use std::process::{Command, Output};

fn ehresmann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehresmann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ehresmann-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn list_is_deterministic_and_complete() {
    let a = ehresmann(&["list", "--format", "json"]);
    let b = ehresmann(&["list", "--format", "json"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let rows: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let names: Vec<&str> = rows
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "trivial-r3",
            "hopf",
            "affine-tangent",
            "nonlinear-tangent",
            "sode-tangent",
            "frame-bundle"
        ]
    );
    let table = stdout(&ehresmann(&["list"]));
    assert_eq!(table.lines().count(), 6);
}

#[test]
fn eval_trivial_bundle() {
    let o = ehresmann(&[
        "eval",
        "trivial-r3",
        "nabla",
        "H1",
        "H1",
        "--at",
        "0,0,pi/2",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["frame"]["H1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["frame"]["V"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn eval_hopf_bracket() {
    let o = ehresmann(&[
        "eval", "hopf", "bracket", "Sigma", "Lambda", "--at", "1,0,0,0", "--format", "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["frame"]["V"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["coordinates"]["y"].as_f64().unwrap() + 2.0).abs() < 1e-12);
}

#[test]
fn eval_rejects_points_off_the_sphere_and_unknown_fields() {
    let off = ehresmann(&["eval", "hopf", "nabla", "V", "V", "--at", "1,1,0,0"]);
    assert_eq!(off.status.code(), Some(2));
    let unknown = ehresmann(&["eval", "hopf", "nabla", "V", "Q", "--at", "1,0,0,0"]);
    assert_eq!(unknown.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&unknown.stderr);
    assert!(msg.contains("Lambda"), "{msg}");
}

#[test]
fn verify_exit_codes() {
    let ok = ehresmann(&["verify", "trivial-r3", "--samples", "5"]);
    assert_eq!(ok.status.code(), Some(0));
    let hopf = stdout(&ehresmann(&["verify", "hopf", "--samples", "5"]));
    assert!(hopf.contains("levi-civita-compatibility"), "{hopf}");
    assert!(!hopf.contains("FAIL"));
    let tight = ehresmann(&[
        "verify",
        "affine-tangent",
        "--samples",
        "5",
        "--tol",
        "1e-30",
    ]);
    assert_eq!(tight.status.code(), Some(1));
    let missing = ehresmann(&["verify", "no-such-scenario"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn verify_json_is_deterministic() {
    let args = ["verify", "hopf", "--samples", "4", "--format", "json"];
    let a = ehresmann(&args);
    let b = ehresmann(&args);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["summary"]["failed"], 0);
    assert_eq!(v["config"]["samples"], 4);
}

#[test]
fn scenario_file_matches_builtin() {
    let path = temp_file(
        "trivial.json",
        include_str!("../../core/scenarios/trivial-r3.json"),
    );
    let path = path.to_str().unwrap();
    let from_file = ehresmann(&["verify", path, "--samples", "4", "--format", "json"]);
    let builtin = ehresmann(&["verify", "trivial-r3", "--samples", "4", "--format", "json"]);
    assert_eq!(from_file.status.code(), Some(0));
    let strip = |o: &Output| {
        let mut v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v["config"]["scenario"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&from_file), strip(&builtin));
}

#[test]
fn bad_scenario_files_are_errors() {
    let cases = [
        ("syntax.json", "{ \"name\": "),
        ("unknown-key.json", "{ \"name\": \"x\", \"colour\": 1 }"),
        (
            "bad-expr.json",
            r#"{ "name": "x", "space": { "coords": ["a"] },
                 "fields": { "E": { "components": { "a": "2a" } } },
                 "split": { "orientation": "k-vertical", "K": ["E"], "blocks": [] } }"#,
        ),
    ];
    for (name, text) in cases {
        let path = temp_file(name, text);
        let o = ehresmann(&["verify", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn describe_lists_expected_rows() {
    let o = ehresmann(&["describe", "hopf", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["frame"], serde_json::json!(["V", "Lambda", "Sigma"]));
    assert_eq!(v["expected"].as_array().unwrap().len(), 4);
}
