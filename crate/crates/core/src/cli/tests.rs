use super::*;

fn data(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("kernopt").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json_of(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let (code, out, err) = run(&all);
    (code, serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}")))
}

#[test]
fn inspect_counts() {
    let case5 = data("case5.m");
    let (code, doc) = json_of(&["inspect", "--case", &case5]);
    assert_eq!(code, 0);
    assert_eq!(doc["nvar"], 44);
    let (_, multi) = json_of(&["inspect", "--case", &case5, "--periods", "--curve", "1,0.9,0.8,0.85"]);
    assert_eq!(multi["nvar"], 4 * 44);
    let (_, lv) = json_of(&["inspect", "--case", "lv:5"]);
    assert_eq!((lv["nvar"].as_u64(), lv["ncon"].as_u64()), (Some(5), Some(3)));
    let (code, text, _) = run(&["inspect", "--case", &case5]);
    assert_eq!(code, 0);
    assert!(text.contains("c_active_power_balance"));
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(run(&["solve", "--case", "/nonexistent/case.m"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", "--case", "lv:x"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", "--case", &data("case5.m"), "--form", "cartesian"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", "--case", &data("case5.m"), "--periods"]).0, EXIT_INPUT);
    assert_eq!(run(&["solve", "--case", &data("case5.m"), "--curve", "1,1"]).0, EXIT_INPUT);
    assert_eq!(run(&["frobnicate"]).0, EXIT_INPUT);
    assert_eq!(run(&["--help"]).0, EXIT_OK);
}

#[test]
fn solve_writes_solution_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("case3.json");
    let (code, doc) = json_of(&["solve", "--case", &data("case3.m"), "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(doc["status"], "optimal");
    let sol: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(sol["objective"], doc["objective"]);
    let names: Vec<&str> = sol["blocks"].as_array().unwrap().iter().map(|b| b["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["va", "vm", "pg", "qg", "p", "q"]);
    assert_eq!(sol["blocks"][1]["values"].as_array().unwrap().len(), 3);
}

#[test]
fn non_optimal_exits_3() {
    let (code, out, _) = run(&["solve", "--case", "lv:50", "--max-iter", "1"]);
    assert_eq!(code, EXIT_FAILED);
    assert!(out.contains("max_iter"));
}

#[test]
fn diffcheck_passes_and_catches_corruption() {
    let (code, out, _) = run(&["diffcheck", "--case", "lv:10"]);
    assert_eq!(code, 0, "{out}");
    let (code, doc) = json_of(&["diffcheck", "--case", &data("case3.m"), "--seed", "1"]);
    assert_eq!((code, &doc["passed"]), (0, &json!(true)));
    let (code, out, _) = run(&["diffcheck", "--case", "lv:10", "--corrupt-jacobian"]);
    assert_eq!(code, EXIT_FAILED);
    assert!(out.contains("jacobian") && out.contains("FAIL at ("), "{out}");
}

#[test]
fn bench_summary() {
    let case3 = data("case3.m");
    let (code, doc) = json_of(&["bench", "--cases", &case3, "lv:20", "/missing.m", "--jobs", "2", "--time-limit", "50"]);
    assert_eq!(code, 0);
    let records = doc["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(records[0]["case"], "case3");
    assert_eq!(records[1]["case"], "lv:20");
    assert!(records[2]["error"].is_string());
    assert_eq!(doc["summary"]["solved"], 2);
    let times: Vec<f64> = records[..2].iter().map(|r| r["wall_seconds"].as_f64().unwrap()).chain([50.0]).collect();
    assert!((doc["summary"]["time_sgm"].as_f64().unwrap() - sgm(&times, 10.0)).abs() < 1e-9);
}
