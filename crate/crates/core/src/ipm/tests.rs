use super::*;
use crate::lv::luksan_vlcek;
use crate::matpower::read_case;
use crate::model::ModelCore;
use crate::opf::{opf_model, Form};
use crate::table::DataTable;

fn single(n: usize) -> DataTable {
    DataTable::new(n).with_index("i", (0..n).collect()).unwrap()
}

fn assert_certified(model: &dyn Nlp, r: &SolveResult, tol: f64) {
    assert_eq!(r.status, Status::Optimal, "{r:?}");
    let k = kkt_residuals(model, &r.x, &r.y, &r.z_lower, &r.z_upper);
    assert!(k.max() <= 10.0 * tol, "{k:?}");
    assert!(r.constraint_violation <= tol, "{}", r.constraint_violation);
}

#[test]
fn unconstrained_quadratic() {
    let mut core = ModelCore::new();
    let x = core.add_free_variable(1).unwrap();
    core.add_objective(&(x.at("i") - 1.0).powi(2), single(1)).unwrap();
    let m = core.compile().unwrap();
    let r = solve(&m, &SolverOptions::default());
    assert_certified(&m, &r, 1e-8);
    assert!((r.x[0] - 1.0).abs() < 1e-8);
}

#[test]
fn circle_equality() {
    let mut core = ModelCore::new();
    let x = core.add_variable(2, f64::NEG_INFINITY, f64::INFINITY, vec![1.0, 0.5]).unwrap();
    core.add_objective(&x.at("i"), single(2)).unwrap();
    let row = DataTable::new(1).with_index("a", vec![0]).unwrap().with_index("b", vec![1]).unwrap();
    core.add_constraint(&(x.at("a").powi(2) + x.at("b").powi(2)), row, 1.0, 1.0).unwrap();
    let m = core.compile().unwrap();
    let r = solve(&m, &SolverOptions::default());
    assert_certified(&m, &r, 1e-8);
    assert!((r.objective + 2f64.sqrt()).abs() < 1e-8, "{}", r.objective);
    assert!((r.y[0] - 1.0 / 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn active_bounds_and_inequalities() {
    // min (x-2)² + (y-2)² s.t. x + y ≤ 1, x ∈ [0, 0.2]
    let mut core = ModelCore::new();
    let x = core.add_variable(1, 0.0, 0.2, 0.1).unwrap();
    let y = core.add_free_variable(1).unwrap();
    core.add_objective(&((x.at("i") - 2.0).powi(2) + (y.at("i") - 2.0).powi(2)), single(1)).unwrap();
    core.add_constraint(&(x.at("i") + y.at("i")), single(1), f64::NEG_INFINITY, 1.0).unwrap();
    let m = core.compile().unwrap();
    let r = solve(&m, &SolverOptions::default());
    assert_certified(&m, &r, 1e-8);
    assert!((r.x[0] - 0.2).abs() < 1e-7 && (r.x[1] - 0.8).abs() < 1e-7, "{:?}", r.x);
    assert!(r.y[0] > 0.0 && r.z_upper[0] > 0.0);
}

#[test]
fn fixed_variables_are_held() {
    let mut core = ModelCore::new();
    let x = core.add_variable(2, vec![3.0, f64::NEG_INFINITY], vec![3.0, f64::INFINITY], 0.0).unwrap();
    let t = DataTable::new(1).with_index("a", vec![0]).unwrap().with_index("b", vec![1]).unwrap();
    core.add_objective(&((x.at("a") - x.at("b")).powi(2) + x.at("a")), t).unwrap();
    let m = core.compile().unwrap();
    let r = solve(&m, &SolverOptions::default());
    assert_certified(&m, &r, 1e-8);
    assert_eq!(r.x[0], 3.0);
    assert!((r.x[1] - 3.0).abs() < 1e-7);
    assert!((r.z_lower[0] - 1.0).abs() < 1e-6);
}

#[test]
fn infeasible_problem_is_not_optimal() {
    let mut core = ModelCore::new();
    let x = core.add_free_variable(1).unwrap();
    core.add_objective(&x.at("i"), single(1)).unwrap();
    core.add_constraint(&x.at("i").powi(2), single(1), f64::NEG_INFINITY, -1.0).unwrap();
    let m = core.compile().unwrap();
    let r = solve(&m, &SolverOptions { max_iter: 200, ..SolverOptions::default() });
    assert_ne!(r.status, Status::Optimal);
}

#[test]
fn domain_errors_do_not_panic() {
    let mut core = ModelCore::new();
    let x = core.add_variable(1, f64::NEG_INFINITY, f64::INFINITY, -1.0).unwrap();
    core.add_objective(&x.at("i").ln(), single(1)).unwrap();
    let m = core.compile().unwrap();
    let r = solve(&m, &SolverOptions::default());
    assert_eq!(r.status, Status::NumericFailure);
}

#[test]
fn iteration_and_time_limits() {
    let m = luksan_vlcek(100).unwrap().compile().unwrap();
    let r = solve(&m, &SolverOptions { max_iter: 2, ..SolverOptions::default() });
    assert_eq!((r.status, r.iterations), (Status::MaxIter, 2));
    let r = solve(&m, &SolverOptions { max_wall_seconds: 0.0, ..SolverOptions::default() });
    assert_eq!(r.status, Status::TimeLimit);
}

#[test]
fn luksan_vlcek_100() {
    let m = luksan_vlcek(100).unwrap().compile().unwrap();
    let r = solve_model(&m, &SolverOptions::default());
    assert_certified(&m, &r, 1e-8);
    assert!((r.objective - 6.232458632438288).abs() <= 1e-6 * 6.232458632438288, "{}", r.objective);
    let t = r.timings;
    let parts = t.init_seconds + t.ad_seconds + t.linsolve_seconds + t.internal_seconds;
    assert!((parts - t.solve_seconds).abs() <= 1e-9 + 1e-6 * t.solve_seconds);
    assert!(t.build_seconds >= 0.0 && t.ad_seconds > 0.0 && t.linsolve_seconds > 0.0);
}

#[test]
fn fixture_cases_both_forms() {
    let cases = [("case3.m", 5.812642974210e+03), ("case5.m", 1.755189092706e+04), ("case14.m", 8.081524742729e+03)];
    for (name, reference) in cases {
        let case = read_case(format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        for form in [Form::Polar, Form::Rect] {
            let m = opf_model(&case, form, None).unwrap();
            let r = solve(&m.model, &SolverOptions::default());
            assert_certified(&m.model, &r, 1e-8);
            assert!((r.objective - reference).abs() <= 1e-6 * reference, "{name} {form}: {}", r.objective);
        }
    }
}

#[test]
fn row_violation_clamps_negatives() {
    let v = row_violation(&[0.5, 2.0, -1.0], &[0.0, 0.0, -0.8], &[1.0, 1.5, 0.0]);
    assert!((v - 0.5).abs() < 1e-15);
    assert_eq!(row_violation(&[0.5], &[0.0], &[1.0]), 0.0);
}
