mod common;

use common::{case, data, rel, solve};
use kernopt::matpower::{parse_load_series, LoadSeries};
use kernopt::opf::{mpopf_model, mpopf_model_series, opf_model, Form, MultiPeriod};
use kernopt::ipm::{solve_model, SolverOptions, Status};
use kernopt::Nlp;

fn series(name: &str, n_bus: usize) -> LoadSeries {
    parse_load_series(&std::fs::read_to_string(data(name)).unwrap(), n_bus, 100.0).unwrap()
}

#[test]
fn flat_curve_is_a_multiple_of_static() {
    let c = case("case3.m");
    let base = solve(&opf_model(&c, Form::Polar, None).unwrap()).objective;
    for form in [Form::Polar, Form::Rect] {
        let options = MultiPeriod { form, corrective_action_ratio: 1.0, ..Default::default() };
        let m = mpopf_model(&c, &[1.0, 1.0, 1.0], options, None).unwrap();
        assert!(rel(solve(&m).objective, 3.0 * base) <= 1e-6);
    }
}

#[test]
fn tighter_ramps_never_help() {
    let c = case("case5.m");
    let curve = [1.0, 0.9, 0.8, 0.85];
    let objective = |r: f64| {
        let m = mpopf_model(&c, &curve, MultiPeriod { corrective_action_ratio: r, ..Default::default() }, None).unwrap();
        solve(&m).objective
    };
    let (loose, mid, tight) = (objective(1.0), objective(0.25), objective(0.1));
    assert!(loose <= mid * (1.0 + 1e-9) && mid <= tight * (1.0 + 1e-9), "{loose} {mid} {tight}");
}

#[test]
fn frozen_generation_cannot_follow_the_curve() {
    // equal outputs in every period cannot serve a 20% load swing
    let c = case("case5.m");
    let options = MultiPeriod { corrective_action_ratio: 0.0, ..Default::default() };
    let m = mpopf_model(&c, &[1.0, 0.9, 0.8, 0.85], options, None).unwrap();
    let r = solve_model(&m.model, &SolverOptions { max_iter: 150, ..SolverOptions::default() });
    assert_ne!(r.status, Status::Optimal);
    assert!(r.constraint_violation > 1e-3);
}

#[test]
fn series_matches_curve() {
    let c = case("case3.m");
    let (pd, qd) = (series("case3_pd.txt", 3), series("case3_qd.txt", 3));
    assert_eq!(pd.periods, 4);
    let from_series = solve(&mpopf_model_series(&c, &pd, &qd, MultiPeriod::default(), None).unwrap()).objective;
    let from_curve = solve(&mpopf_model(&c, &[1.0, 0.92, 0.85, 0.97], MultiPeriod::default(), None).unwrap()).objective;
    assert!(rel(from_series, from_curve) <= 1e-8, "{from_series} {from_curve}");
}

#[test]
fn single_period_series_is_static() {
    let c = case("case5.m");
    let one = |f: &dyn Fn(&kernopt::matpower::Bus) -> f64| LoadSeries {
        periods: 1,
        values: vec![c.buses.iter().map(f).collect()],
    };
    let m = mpopf_model_series(&c, &one(&|b| b.pd), &one(&|b| b.qd), MultiPeriod::default(), None).unwrap();
    let s = opf_model(&c, Form::Polar, None).unwrap();
    assert_eq!((m.model.nvar(), m.model.ncon()), (s.model.nvar(), s.model.ncon()));
    assert_eq!(m.model.jacobian_structure(), s.model.jacobian_structure());
    assert!(rel(solve(&m).objective, solve(&s).objective) <= 1e-10);
}

#[test]
fn ramp_rows_hold_at_the_solution() {
    let c = case("case5.m");
    let curve = [1.0, 0.9, 0.8, 0.85];
    let m = mpopf_model(&c, &curve, MultiPeriod { corrective_action_ratio: 0.1, ..Default::default() }, None).unwrap();
    let r = solve(&m);
    let pg = m.model.solution(&r.x, &m.vars.pg).unwrap();
    for (i, g) in m.case.gens.iter().enumerate() {
        for t in 1..4 {
            let step = (pg.get(i, t) - pg.get(i, t - 1)).abs();
            assert!(step <= 0.1 * (g.pmax - g.pmin) + 1e-8, "gen {i} period {t}: {step}");
        }
    }
}
