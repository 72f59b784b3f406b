use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use conformal_ridge::{brr_predict, crr_predict, Dataset, RidgeConfig};
use tempfile::TempDir;

fn crr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses the predict output into header and rows of cells.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn cell(header: &[String], row: &[String], name: &str) -> String {
    row[header.iter().position(|h| h == name).unwrap()].clone()
}

#[test]
fn toy_file_gives_degenerate_crr_interval() {
    let dir = TempDir::new().unwrap();
    let body = format!("x1,y\n{}1,\n", "1,0\n".repeat(10));
    let input = write(&dir, "toy.csv", &body);
    let out = crr(&[
        "predict",
        "--input",
        s(&input),
        "--a",
        "0",
        "--epsilon",
        "0.5",
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, rows) = table(&stdout(&out));
    assert_eq!(rows.len(), 1);
    assert_eq!(cell(&h, &rows[0], "crr_upper"), "0");
    assert_eq!(cell(&h, &rows[0], "crr_lower"), "0");
    assert_eq!(cell(&h, &rows[0], "status"), "ok");
}

#[test]
fn single_training_row_is_uninformative() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "one.csv", "x1,y\n1,0.3\n2,\n");
    let out = crr(&["predict", "--input", s(&input), "--epsilon", "0.5", "--seed", "1"]);
    assert!(out.status.success());
    let (h, rows) = table(&stdout(&out));
    assert_eq!(cell(&h, &rows[0], "crr_lower"), "-inf");
    assert_eq!(cell(&h, &rows[0], "crr_upper"), "inf");
    assert!(cell(&h, &rows[0], "brr_upper").parse::<f64>().unwrap().is_finite());
}

#[test]
fn predict_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("x1,x2,y\n");
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..40 {
        let x1 = (i as f64 * 0.37).sin() * 2.0;
        let x2 = (i as f64 * 0.11).cos();
        let y = 1.5 * x1 - 0.7 * x2 + (i as f64 * 1.3).sin() * 0.2;
        body.push_str(&format!("{x1},{x2},{y}\n"));
        rows.push([x1, x2]);
        labels.push(y);
    }
    let tests = [[0.3, -0.2], [1.7, 0.9], [-2.5, 0.1]];
    for t in &tests {
        body.push_str(&format!("{},{},\n", t[0], t[1]));
    }
    let input = write(&dir, "data.csv", &body);
    let output = dir.path().join("out.csv");
    let out = crr(&[
        "predict",
        "--input",
        s(&input),
        "--output",
        s(&output),
        "--a",
        "0.5",
        "--sigma",
        "0.3",
        "--epsilon",
        "0.1",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (h, parsed) = table(&std::fs::read_to_string(&output).unwrap());
    assert_eq!(parsed.len(), tests.len());

    let train = Dataset::from_rows(&rows, &labels).unwrap();
    let cfg = RidgeConfig::new(0.5, 0.3, 0.1).unwrap();
    for (row, t) in parsed.iter().zip(&tests) {
        let brr = brr_predict(&train, t, &cfg).unwrap();
        let crr_iv = crr_predict(&train, t, 0.5, 0.1).unwrap();
        let get = |name: &str| cell(&h, row, name).parse::<f64>().unwrap();
        assert_eq!(get("brr_lower"), brr.lower);
        assert_eq!(get("brr_upper"), brr.upper);
        assert_eq!(get("crr_lower"), crr_iv.lower);
        assert_eq!(get("crr_upper"), crr_iv.upper);
        assert_eq!(cell(&h, row, "crr_method"), "analytic");
    }
    assert_eq!(cell(&h, &parsed[0], "line"), "42");
}

#[test]
fn missing_input_exits_2_and_names_path() {
    let out = crr(&["predict", "--input", "/no/such/file.csv", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/no/such/file.csv"));
}

#[test]
fn malformed_input_exits_3_with_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.csv", "x1,y\n1,2\n3,oops\n");
    let out = crr(&["predict", "--input", s(&input), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let input = write(&dir, "header.csv", "a,b\n1,2\n");
    let out = crr(&["predict", "--input", s(&input), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("header"));

    let input = write(&dir, "ragged.csv", "x1,y\n1,2\n3\n");
    let out = crr(&["predict", "--input", s(&input), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "d.csv", "x1,y\n1,2\n1,\n");
    let out = crr(&["predict", "--input", s(&input), "--epsilon", "1.5", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(crr(&["predict", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        crr(&["coverage", "--trials", "0", "--seed", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        crr(&["theorem1", "--trials", "0", "--seed", "1"]).status.code(),
        Some(2)
    );
    let out = crr(&[
        "curves",
        "--grid-min",
        "0.5",
        "--grid-max",
        "1.5",
        "--grid-steps",
        "4",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = crr(&["coverage", "--object-law", "constant-one", "--p", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn curves_default_panels() {
    let out = crr(&["curves", "--seed", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "epsilon,std_upper,std_lower,asymptote");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 99);
    assert_eq!(rows[0][0], 0.01);
    assert_eq!(rows[98][0], 0.99);
    let at = rows.iter().find(|r| r[0] == 0.05).unwrap();
    assert!((at[1] - 2.672).abs() < 0.01);

    let out = crr(&["curves", "--panel", "small", "--seed", "1"]);
    let eps: Vec<f64> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(eps.iter().all(|&e| e > 0.0 && e <= 0.05));
}

#[test]
fn coverage_reports_are_byte_identical_for_a_seed() {
    let args = [
        "coverage",
        "--n",
        "40",
        "--trials",
        "300",
        "--p",
        "2",
        "--smoothed",
        "--seed",
        "99",
    ];
    let a = crr(&args);
    let b = crr(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let json: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(json["seed"], 99);
    assert!(json["coverage"]["smoothed"].is_object());
}

#[test]
fn omitted_seed_is_printed_and_reproducible() {
    let out = crr(&["coverage", "--n", "20", "--trials", "50"]);
    assert!(out.status.success());
    let err = stderr(&out);
    let seed = err
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .expect("seed line")
        .trim()
        .to_string();
    let again = crr(&["coverage", "--n", "20", "--trials", "50", "--seed", &seed]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn theorem1_constant_objects_pass() {
    let out = crr(&[
        "theorem1",
        "--object-law",
        "constant-one",
        "--n",
        "2000",
        "--trials",
        "4000",
        "--epsilon",
        "0.1",
        "--seed",
        "2024",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = &json["endpoint"];
    let target = e["target_std"].as_f64().unwrap();
    let std = e["upper"]["moments"]["std"].as_f64().unwrap();
    assert!((std / target - 1.0).abs() <= 0.10, "{std} vs {target}");
    assert_eq!(json["passed"], true);
}

#[test]
fn failed_checks_still_exit_0() {
    let out = crr(&[
        "theorem1",
        "--n",
        "100",
        "--trials",
        "200",
        "--std-tolerance",
        "1e-9",
        "--seed",
        "5",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().nth(1).unwrap().ends_with("false"));
}

#[test]
fn trial_records_only_on_request() {
    let base = ["coverage", "--n", "20", "--trials", "30", "--seed", "3"];
    let slim: serde_json::Value = serde_json::from_slice(&crr(&base).stdout).unwrap();
    assert!(slim.get("trials").is_none());
    let mut args = base.to_vec();
    args.push("--include-trials");
    let full: serde_json::Value = serde_json::from_slice(&crr(&args).stdout).unwrap();
    assert_eq!(full["trials"]["records"].as_array().unwrap().len(), 30);
}
