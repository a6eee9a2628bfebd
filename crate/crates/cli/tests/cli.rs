use std::path::Path;
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn hitwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitwalk"))
        .args(args)
        .env_remove("HITWALK_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = hitwalk(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn schema() -> JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/result_record.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::options()
        .should_validate_formats(true)
        .compile(&schema)
        .expect("schema compiles")
}

fn assert_valid(schema: &JSONSchema, record: &Value) {
    if let Err(errors) = schema.validate(record) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("record fails schema: {msgs:?}\n{record:#}");
    }
}

/// Rows of a CSV body keyed by header.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

#[test]
fn resolvent_anchor_rows() {
    let text = stdout(&[
        "mht",
        "--targets",
        "-5",
        "5",
        "--start",
        "0",
        "--coin",
        "plus",
        "--reset-p",
        "0",
        "--method",
        "resolvent",
    ]);
    assert!(!text.contains('\r'));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["method"], "resolvent");
    assert!((rows[0]["mht"].parse::<f64>().unwrap() - 25.0).abs() < 1e-8);

    let rows = csv_rows(&stdout(&[
        "mht",
        "--targets",
        "-1",
        "1",
        "--start",
        "0",
        "--reset-p",
        "0",
    ]));
    assert!((rows[0]["mht"].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn all_methods_agree_on_a_grid() {
    let text = stdout(&[
        "mht",
        "--targets",
        "-5",
        "5",
        "--p-grid",
        "0:0.2:0.1",
        "--method",
        "all",
        "--trajectories",
        "4000",
        "--seed",
        "5",
    ]);
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 9);
    for chunk in rows.chunks(3) {
        let methods: Vec<&str> = chunk.iter().map(|r| r["method"].as_str()).collect();
        assert_eq!(methods, ["resolvent", "series", "mc"]);
        let resolvent: f64 = chunk[0]["mht"].parse().unwrap();
        let series: f64 = chunk[1]["mht"].parse().unwrap();
        let mc: f64 = chunk[2]["mht"].parse().unwrap();
        assert!(((series - resolvent) / resolvent).abs() < 1e-6);
        let se: f64 = chunk[2]["diagnostic"]
            .split(';')
            .find_map(|kv| kv.strip_prefix("standard_error="))
            .unwrap()
            .parse()
            .unwrap();
        assert!((mc - resolvent).abs() <= 4.0 * se, "mc {mc} ± {se} vs {resolvent}");
    }
}

#[test]
fn json_records_validate_against_the_schema() {
    let schema = schema();
    let mht: Value = serde_json::from_str(&stdout(&[
        "mht",
        "--targets",
        "-3",
        "4",
        "--start",
        "1",
        "--coin",
        "1,1i",
        "--p-grid",
        "0:0.1:0.05",
        "--q-grid",
        "0:0.2:0.2",
        "--method",
        "all",
        "--trajectories",
        "500",
        "--format",
        "json",
        "--timestamp",
    ]))
    .unwrap();
    let records = mht.as_array().unwrap();
    assert_eq!(records.len(), 3 * 2 * 3);
    for r in records {
        assert_valid(&schema, r);
    }

    let failed: Value = serde_json::from_str(
        &String::from_utf8(
            hitwalk(&[
                "mht",
                "--targets",
                "-5",
                "5",
                "--reset-p",
                "0.9",
                "--method",
                "series",
                "--max-steps",
                "50",
                "--format",
                "json",
            ])
            .stdout,
        )
        .unwrap(),
    )
    .unwrap();
    assert_eq!(failed[0]["values"], Value::Null);
    assert_eq!(failed[0]["diagnostics"]["error"], "NonConvergent");
    assert_valid(&schema, &failed[0]);

    for args in [
        &[
            "msd",
            "--model",
            "quantum",
            "--steps",
            "30",
            "--sigma",
            "2",
            "--distributions-at",
            "0,30",
            "--format",
            "json",
        ][..],
        &["optimize", "--targets", "-3", "3", "--grid-resolution", "20"][..],
        &["reference", "--emit-coefficients", "--at", "0.1"][..],
    ] {
        let record: Value = serde_json::from_str(&stdout(args)).unwrap();
        assert_valid(&schema, &record);
    }
}

#[test]
fn schema_rejects_malformed_records() {
    let schema = schema();
    let good: Value = serde_json::from_str(&stdout(&["reference", "--emit-coefficients"])).unwrap();
    let mut extra = good.clone();
    extra["surprise"] = Value::from(1);
    assert!(!schema.is_valid(&extra));
    let mut missing = good.clone();
    missing.as_object_mut().unwrap().remove("software_version");
    assert!(!schema.is_valid(&missing));
    let mut short = good;
    short["values"]["numerator_coeffs"].as_array_mut().unwrap().pop();
    assert!(!schema.is_valid(&short));
}

#[test]
fn reference_coefficients_are_exact() {
    let record: Value = serde_json::from_str(&stdout(&["reference", "--emit-coefficients"])).unwrap();
    let a = record["values"]["numerator_coeffs"].as_array().unwrap();
    let b = record["values"]["denominator_coeffs"].as_array().unwrap();
    assert_eq!((a.len(), b.len()), (32, 30));
    assert_eq!(a[0], 25);
    assert_eq!(a[31], 64);
    assert_eq!(b[0], 1);
    assert_eq!(b[29], 8);
    assert_eq!(a[16], -7_981_402_521i64);
}

#[test]
fn optimize_examples() {
    let r: Value = serde_json::from_str(&stdout(&["optimize", "--targets", "-5", "5"])).unwrap();
    assert!(r["values"]["mht_star"].as_f64().unwrap() < 25.0);
    let r: Value = serde_json::from_str(&stdout(&["optimize", "--targets", "-6", "6", "--noise-q", "0.5"])).unwrap();
    assert_eq!(r["values"]["p_star"].as_f64().unwrap(), 0.0);
}

#[test]
fn msd_examples() {
    let rows = csv_rows(&stdout(&[
        "msd",
        "--model",
        "classical",
        "--sigma",
        "0",
        "--steps",
        "100",
    ]));
    assert_eq!(rows.len(), 101);
    for r in &rows {
        let t: f64 = r["t"].parse().unwrap();
        assert!((r["msd"].parse::<f64>().unwrap() - t).abs() < 1e-10 * t.max(1.0));
    }

    let out = hitwalk(&[
        "msd",
        "--model",
        "quantum",
        "--sigma",
        "0",
        "--coin",
        "symmetric",
        "--steps",
        "200",
    ]);
    assert!(out.status.success());
    let footer: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().trim()).unwrap();
    let e = footer["values"]["fitted_exponent"].as_f64().unwrap();
    assert!((1.95..=2.05).contains(&e), "{e}");

    let last = |model: &str| -> f64 {
        let rows = csv_rows(&stdout(&["msd", "--model", model, "--sigma", "10", "--steps", "100"]));
        rows[100]["msd"].parse().unwrap()
    };
    assert!(last("classical") > last("quantum"));
}

#[test]
fn msd_distributions_go_to_a_sibling_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spread.csv");
    let status = hitwalk(&[
        "msd",
        "--model",
        "quantum",
        "--steps",
        "20",
        "--distributions-at",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let snap = std::fs::read_to_string(dir.path().join("spread.distributions.csv")).unwrap();
    let rows = csv_rows(&snap);
    let total: f64 = rows.iter().map(|r| r["probability"].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(rows.iter().all(|r| r["t"] == "20"));

    // Without a file there is nowhere to put the snapshots.
    let bare = hitwalk(&["msd", "--model", "quantum", "--steps", "20", "--distributions-at", "20"]);
    assert_eq!(bare.status.code(), Some(2));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, format: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let out = hitwalk(&[
            "mht",
            "--targets",
            "-4",
            "4",
            "--p-grid",
            "0:0.3:0.1",
            "--noise-q",
            "0.2",
            "--method",
            "all",
            "--seed",
            "17",
            "--trajectories",
            "2000",
            "--format",
            format,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv", "csv"), run("b.csv", "csv"));
    assert_eq!(run("a.json", "json"), run("b.json", "json"));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_hitwalk"))
        .args(["mht", "--targets", "-2", "2"])
        .env("HITWALK_OUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("mht.csv")).unwrap();
    assert!(text.starts_with("p,q,method,mht,diagnostic\n"));

    let status = Command::new(env!("CARGO_BIN_EXE_hitwalk"))
        .args(["reference", "--emit-coefficients", "--out", "nested/coeffs.json"])
        .env("HITWALK_OUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("nested/coeffs.json").exists());
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| hitwalk(args).status.code();
    assert_eq!(code(&["mht", "--targets", "5", "-5"]), Some(2));
    assert_eq!(code(&["mht", "--targets", "-5", "5", "--reset-p", "1.0"]), Some(2));
    assert_eq!(code(&["mht", "--targets", "-5", "5", "--coin", "0,0"]), Some(2));
    assert_eq!(code(&["mht", "--targets", "-5"]), Some(2));
    assert_eq!(code(&["mht", "--targets", "-5", "5", "--p-grid", "0:1:0"]), Some(2));
    assert_eq!(
        code(&["msd", "--model", "quantum", "--steps", "50", "--halfwidth", "10"]),
        Some(2)
    );
    assert_eq!(code(&["reference"]), Some(2));
    assert_eq!(
        code(&[
            "mht",
            "--targets",
            "-5",
            "5",
            "--reset-p",
            "0.9",
            "--method",
            "series",
            "--max-steps",
            "100"
        ]),
        Some(3)
    );
    assert_eq!(
        code(&[
            "mht",
            "--targets",
            "-5",
            "5",
            "--reset-p",
            "0.5",
            "--method",
            "mc",
            "--max-steps",
            "5",
            "--trajectories",
            "50"
        ]),
        Some(3)
    );
    assert_eq!(
        code(&["mht", "--targets", "-5", "5", "--out", "/proc/definitely/not/here.csv"]),
        Some(4)
    );
}

#[test]
fn failing_points_keep_their_rows() {
    let out = hitwalk(&[
        "mht",
        "--targets",
        "-5",
        "5",
        "--p-grid",
        "0:0.9:0.9",
        "--method",
        "series",
        "--max-steps",
        "5000",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(!rows[0]["mht"].is_empty());
    assert!(rows[1]["mht"].is_empty());
}
