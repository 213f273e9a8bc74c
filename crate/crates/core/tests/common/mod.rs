#![allow(dead_code)]

use kernopt::ipm::{solve_model, SolveResult, SolverOptions, Status};
use kernopt::matpower::{read_case, CaseData};
use kernopt::opf::OpfModel;

pub fn data(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn case(name: &str) -> CaseData {
    read_case(data(name)).unwrap()
}

pub fn solve(m: &OpfModel) -> SolveResult {
    let r = solve_model(&m.model, &SolverOptions::default());
    assert_eq!(r.status, Status::Optimal, "{}", r.objective);
    r
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
