use serde::Serialize;

use crate::ipm::{Status, Timings};

/// Shifted geometric mean `(∏(vᵢ + Δ))^{1/n} − Δ`; plain geometric mean at
/// `Δ = 0`. Empty input gives NaN.
pub fn sgm(values: &[f64], shift: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let n = values.len() as f64;
    if shift == 0.0 {
        return (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp();
    }
    // Δ·(exp(mean ln(1 + v/Δ)) − 1), exact for tiny v
    shift * (values.iter().map(|v| (v / shift).ln_1p()).sum::<f64>() / n).exp_m1()
}

/// One solve of one case under one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub case: String,
    pub form: String,
    pub periods: usize,
    pub tol: f64,
    pub status: Status,
    pub objective: f64,
    pub iterations: usize,
    /// Model build plus solve wall time.
    pub wall_seconds: f64,
    pub constraint_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complementarity_violation: Option<f64>,
    pub timings: Timings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status == Status::Optimal && self.error.is_none()
    }

    /// Single `key=value` line with a fixed field order.
    pub fn to_line(&self) -> String {
        let t = &self.timings;
        let mut line = format!(
            "case={} form={} periods={} tol={:e} status={} objective={:.12e} iterations={} wall_seconds={:.6} \
             constraint_violation={:.3e}",
            self.case,
            self.form,
            self.periods,
            self.tol,
            self.status,
            self.objective,
            self.iterations,
            self.wall_seconds,
            self.constraint_violation
        );
        if let Some(c) = self.complementarity_violation {
            line += &format!(" complementarity_violation={c:.3e}");
        }
        line += &format!(
            " build={:.6} init={:.6} ad={:.6} linsolve={:.6} internal={:.6}",
            t.build_seconds, t.init_seconds, t.ad_seconds, t.linsolve_seconds, t.internal_seconds
        );
        if let Some(e) = &self.error {
            line += &format!(" error={e:?}");
        }
        line
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchSummary {
    pub cases: usize,
    pub solved: usize,
    pub shift: f64,
    pub time_sgm: f64,
    /// Over solved cases only; NaN when none solved.
    pub violation_sgm: f64,
}

/// Unsolved runs enter the time mean at `time_limit` and are left out of
/// the violation mean.
pub fn summarize(records: &[RunRecord], time_limit: f64, shift: f64) -> BenchSummary {
    let times: Vec<f64> =
        records.iter().map(|r| if r.solved() { r.wall_seconds.min(time_limit) } else { time_limit }).collect();
    let violations: Vec<f64> = records.iter().filter(|r| r.solved()).map(|r| r.constraint_violation).collect();
    BenchSummary {
        cases: records.len(),
        solved: violations.len(),
        shift,
        time_sgm: sgm(&times, shift),
        violation_sgm: sgm(&violations, shift),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record(status: Status, wall: f64, violation: f64) -> RunRecord {
        RunRecord {
            case: "c".into(),
            form: "polar".into(),
            periods: 1,
            tol: 1e-8,
            status,
            objective: 0.0,
            iterations: 1,
            wall_seconds: wall,
            constraint_violation: violation,
            complementarity_violation: None,
            timings: Timings::default(),
            error: None,
        }
    }

    #[test]
    fn sgm_values() {
        assert!((sgm(&[5.0], 10.0) - 5.0).abs() < 1e-12);
        assert!((sgm(&[10.0, 40.0], 10.0) - ((20.0f64 * 50.0).sqrt() - 10.0)).abs() < 1e-12);
        assert!((sgm(&[2.0, 8.0], 0.0) - 4.0).abs() < 1e-12);
        assert!(sgm(&[], 10.0).is_nan());
        assert!((sgm(&[1e-12, 1e-12], 10.0) - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn sgm_shift_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(1..8);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..100.0)).collect();
            let geo = (v.iter().map(|x: &f64| x.ln()).sum::<f64>() / n as f64).exp();
            assert!((sgm(&v, 0.0) - geo).abs() <= 1e-12 * geo);
            let c = rng.gen_range(0.1..50.0);
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let base = sgm(&v, 10.0);
            let moved = sgm(&shifted, 10.0);
            // superadditivity below, the arithmetic mean above
            let mean = v.iter().sum::<f64>() / n as f64;
            assert!(moved - base >= c - 1e-9 && moved <= mean + c + 1e-9);
        }
    }

    #[test]
    fn unsolved_cases_use_the_limit() {
        let mut failed = record(Status::TimeLimit, 250.0, 7.0);
        failed.constraint_violation = 7.0;
        let s = summarize(&[record(Status::Optimal, 1.0, 1e-9), failed], 100.0, 10.0);
        assert_eq!((s.cases, s.solved), (2, 1));
        assert!((s.time_sgm - sgm(&[1.0, 100.0], 10.0)).abs() < 1e-12);
        assert!((s.violation_sgm - 1e-9).abs() < 1e-18);
    }

    #[test]
    fn record_line_is_stable() {
        let r = record(Status::Optimal, 1.5, 0.0);
        assert_eq!(r.to_line(), r.clone().to_line());
        assert!(r.to_line().starts_with("case=c form=polar periods=1 tol=1e-8 status=optimal"));
    }
}
