use serde_json::Value;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_nfsusy");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("nfsusy-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn analyze_reports_unbroken_rational_model() {
    let out = run(&[
        "analyze",
        "--id",
        "B.rational",
        "--mass",
        "const",
        "--N",
        "1",
        "--param",
        "b1=0.25",
        "--param",
        "k=1",
        "--param",
        "z0=1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "nfsusy/1");
    assert_eq!(v["classification"], "unbroken");
    assert_eq!(v["match"], true);
    assert!(v["verdicts"]["minus"].is_object() && v["verdicts"]["plus"].is_object());
}

#[test]
fn expect_paper_turns_a_mismatch_into_exit_one() {
    let args = ["analyze", "--id", "B.exp", "--N", "3", "--param", "b1=-1/2", "--mass", "algebraic_pole"];
    assert_eq!(run(&args).status.code(), Some(0));
    let mut strict = args.to_vec();
    strict.push("--expect-paper");
    let out = run(&strict);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["match"], false);
}

#[test]
fn closure_certificate_is_exact() {
    let out = run(&["verify", "--what", "closure", "--type", "X2", "--N", "4", "--draws", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "exact");
    assert_eq!(v["residual_max"], "0");
    assert_eq!(v["checks"], 40);
}

#[test]
fn verify_output_is_deterministic_for_a_seed() {
    let args = ["verify", "--what", "intertwine", "--type", "B", "--N", "3", "--draws", "3", "--seed", "42"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 42);
}

#[test]
fn errors_are_single_coded_lines() {
    for (args, code) in [
        (vec!["analyze", "--id", "B.nope", "--N", "2"], "E_UNKNOWN_MODEL"),
        (vec!["analyze", "--id", "B.exp", "--N", "2", "--mass", "lead"], "E_UNKNOWN_MASS"),
        (vec!["analyze", "--id", "B.exp", "--N", "2", "--param", "zz=1"], "E_UNKNOWN_PARAM"),
        (vec!["analyze", "--id", "B.exp", "--N", "2", "--param", "b1"], "E_USAGE"),
        (vec!["analyze", "--id", "B.exp", "--N", "2", "--frobnicate"], "E_USAGE"),
        (vec!["spectrum", "--id", "B.exp", "--N", "2", "--range", "3:1"], "E_USAGE"),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with(&format!("error[{code}]: ")), "{err}");
    }
}

#[test]
fn potential_dump_has_full_precision() {
    let path = scratch("grid.csv");
    let out = run(&[
        "model",
        "--id",
        "B.trig",
        "--N",
        "3",
        "--param",
        "b1=2",
        "--param",
        "z0=1.5",
        "--mass",
        "gauss2",
        "--dump-potential",
        path.to_str().unwrap(),
        "--points",
        "11",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["domain"][0], "-inf");
    assert_eq!(v["restricted"]["minus"]["cayley_hamilton"], true);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,U_minus,U_plus,m"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 11);
    for cell in rows[5].split(',') {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17, "{cell}");
        cell.parse::<f64>().unwrap();
    }
}

#[test]
fn spectrum_csv_marks_matched_levels() {
    let path = scratch("spec.csv");
    let out = run(&[
        "spectrum",
        "--id",
        "B.rational",
        "--N",
        "2",
        "--side",
        "plus",
        "--grid",
        "1000",
        "--count",
        "6",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows.iter().filter(|r| !r[3].is_empty()).count(), 2);
    let levels: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(levels.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn table1_grid_lists_every_cell() {
    let path = scratch("table1.json");
    let out = run(&["table1", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["schema"], "nfsusy/1");
    assert_eq!(v["grid"].as_array().unwrap().len(), 7);
    assert_eq!(v["cells"], 26);
    assert_eq!(v["indeterminate"], 0);
}
