use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn kernopt(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kernopt")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn objective(args: &[&str]) -> f64 {
    let mut all = vec!["--json", "solve"];
    all.extend_from_slice(args);
    let (code, out) = kernopt(&all);
    assert_eq!(code, 0, "{out}");
    let doc: Value = serde_json::from_str(&out).unwrap();
    doc["objective"].as_f64().unwrap()
}

#[test]
fn solve_case5_both_forms() {
    let case5 = data("case5.m");
    let polar = objective(&["--case", &case5]);
    assert!((polar - 1.7552e4).abs() < 1.0);
    let rect = objective(&["--case", &case5, "--form", "rect"]);
    assert!((polar - rect).abs() <= 1e-6 * polar);
    let two = objective(&["--case", &case5, "--periods", "--curve", "1,1", "--car", "1.0"]);
    assert!((two - 2.0 * polar).abs() <= 1e-6 * two);
}

#[test]
fn series_flags() {
    let (pd, qd) = (data("case3_pd.txt"), data("case3_qd.txt"));
    let v = objective(&["--case", &data("case3.m"), "--periods", "--pd", &pd, "--qd", &qd]);
    let c = objective(&["--case", &data("case3.m"), "--periods", "--curve", "1,0.92,0.85,0.97"]);
    assert!((v - c).abs() <= 1e-8 * c);
    assert_eq!(kernopt(&["solve", "--case", &data("case5.m"), "--periods", "--pd", &pd, "--qd", &qd]).0, 2);
}

#[test]
fn exit_codes() {
    assert_eq!(kernopt(&["solve", "--case", "missing.m"]).0, 2);
    assert_eq!(kernopt(&["solve", "--case", "lv:30", "--max-iter", "2"]).0, 3);
    assert_eq!(kernopt(&["diffcheck", "--case", "lv:10", "--corrupt-jacobian"]).0, 3);
    assert_eq!(kernopt(&["diffcheck", "--case", &data("case14.m"), "--form", "rect", "--points", "2"]).0, 0);
}

#[test]
fn reports_are_stable_across_runs() {
    let args = ["--json", "diffcheck", "--case", &data("case5.m"), "--seed", "4"];
    assert_eq!(kernopt(&args), kernopt(&args));
    let inspect = ["inspect", "--case", &data("case14.m"), "--form", "rect"];
    assert_eq!(kernopt(&inspect), kernopt(&inspect));
}

#[test]
fn bench_text_report() {
    let (code, out) = kernopt(&["bench", "--cases", &data("case3.m"), &data("case5.m"), "--shift", "10"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("case=case3 form=polar periods=1"));
    assert!(lines[2].starts_with("summary cases=2 solved=2"));
}
