//! Central finite-difference verification of the derivative callbacks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{compress, Nlp};
use crate::model::ModelError;

/// Gradient and Jacobian threshold.
pub const FIRST_ORDER_TOL: f64 = 1e-6;
/// Hessian threshold.
pub const SECOND_ORDER_TOL: f64 = 1e-5;
/// Magnitude above which a finite-difference entry counts as a nonzero.
pub const NONZERO_TOL: f64 = 1e-8;

fn step(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

fn rel_err(a: f64, fd: f64) -> f64 {
    (a - fd).abs() / fd.abs().max(1.0)
}

/// Largest discrepancy of one derivative class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Worst {
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub fd: f64,
    pub rel_err: f64,
}

impl Worst {
    fn update(&mut self, row: usize, col: usize, analytic: f64, fd: f64) {
        let e = rel_err(analytic, fd);
        if e > self.rel_err || e.is_nan() {
            *self = Worst { row, col, analytic, fd, rel_err: e };
        }
    }

    fn merge(&mut self, other: Worst) {
        if other.rel_err > self.rel_err || other.rel_err.is_nan() {
            *self = other;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DiffReport {
    pub gradient: Worst,
    pub jacobian: Worst,
    pub hessian: Worst,
    /// Finite-difference nonzeros outside the declared structure.
    pub missing_jacobian: usize,
    pub missing_hessian: usize,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.gradient.rel_err <= FIRST_ORDER_TOL
            && self.jacobian.rel_err <= FIRST_ORDER_TOL
            && self.hessian.rel_err <= SECOND_ORDER_TOL
    }

    fn merge(&mut self, other: &DiffReport) {
        self.gradient.merge(other.gradient);
        self.jacobian.merge(other.jacobian);
        self.hessian.merge(other.hessian);
        self.missing_jacobian += other.missing_jacobian;
        self.missing_hessian += other.missing_hessian;
    }
}

/// Options for [`check_derivatives`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub points: usize,
    pub seed: u64,
    /// Negative control: perturbs the first raw Jacobian slot.
    pub corrupt_jacobian: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { points: 5, seed: 1, corrupt_jacobian: false }
    }
}

/// A random point strictly inside the variable bounds.
pub fn random_interior_point<R: Rng>(model: &dyn Nlp, rng: &mut R) -> Vec<f64> {
    let (lo, hi, x0) = (model.x_lower(), model.x_upper(), model.start());
    (0..model.nvar())
        .map(|i| match (lo[i].is_finite(), hi[i].is_finite()) {
            (true, true) if hi[i] > lo[i] => lo[i] + (hi[i] - lo[i]) * rng.gen_range(0.1..0.9),
            (true, true) => lo[i],
            (true, false) => lo[i] + rng.gen_range(0.1..1.0),
            (false, true) => hi[i] - rng.gen_range(0.1..1.0),
            (false, false) => x0[i] + rng.gen_range(-0.5..0.5),
        })
        .collect()
}

fn lagrangian_gradient(model: &dyn Nlp, x: &[f64], mult: &[f64], coords: &[(usize, usize)]) -> Result<Vec<f64>, ModelError> {
    let mut g = vec![0.0; model.nvar()];
    model.eval_gradient(x, &mut g)?;
    let mut j = vec![0.0; coords.len()];
    model.eval_jacobian(x, &mut j)?;
    for (&(r, c), v) in coords.iter().zip(j) {
        g[c] += mult[r] * v;
    }
    Ok(g)
}

/// Compares analytic derivatives with central differences at one point.
pub fn check_at(model: &dyn Nlp, x: &[f64], mult: &[f64], corrupt_jacobian: bool) -> Result<DiffReport, ModelError> {
    let (n, m) = (model.nvar(), model.ncon());
    let mut report = DiffReport::default();

    let mut grad = vec![0.0; n];
    model.eval_gradient(x, &mut grad)?;

    let jc = model.jacobian_structure().to_vec();
    let cj = compress(&jc);
    let mut jraw = vec![0.0; jc.len()];
    model.eval_jacobian(x, &mut jraw)?;
    if corrupt_jacobian && !jraw.is_empty() {
        jraw[0] += 1e-3 * (1.0 + jraw[0].abs());
    }
    let mut jac = vec![0.0; n * m];
    for (&(r, c), v) in jc.iter().zip(&jraw) {
        jac[r * n + c] += v;
    }
    let mut jdeclared = vec![false; n * m];
    cj.coords.iter().for_each(|&(r, c)| jdeclared[r * n + c] = true);

    let hc = model.hessian_structure().to_vec();
    let ch = compress(&hc);
    let mut hraw = vec![0.0; hc.len()];
    model.eval_hessian(x, mult, 1.0, &mut hraw)?;
    let mut hess = vec![0.0; n * n];
    for (&(r, c), v) in hc.iter().zip(&hraw) {
        hess[r * n + c] += v;
    }
    let mut hdeclared = vec![false; n * n];
    ch.coords.iter().for_each(|&(r, c)| hdeclared[r * n + c] = true);

    let mut xp = x.to_vec();
    let mut cp = vec![0.0; m];
    let mut cm = vec![0.0; m];
    let mut fd_hess = vec![0.0; n * n];
    for j in 0..n {
        let h = step(x[j]);
        xp[j] = x[j] + h;
        let fp = model.eval_objective(&xp)?;
        model.eval_constraints(&xp, &mut cp)?;
        let lp = lagrangian_gradient(model, &xp, mult, &jc)?;
        xp[j] = x[j] - h;
        let fm = model.eval_objective(&xp)?;
        model.eval_constraints(&xp, &mut cm)?;
        let lm = lagrangian_gradient(model, &xp, mult, &jc)?;
        xp[j] = x[j];

        report.gradient.update(0, j, grad[j], (fp - fm) / (2.0 * h));
        for r in 0..m {
            let fd = (cp[r] - cm[r]) / (2.0 * h);
            report.jacobian.update(r, j, jac[r * n + j], fd);
            if fd.abs() > NONZERO_TOL && !jdeclared[r * n + j] {
                report.missing_jacobian += 1;
            }
        }
        for i in 0..n {
            fd_hess[i * n + j] = (lp[i] - lm[i]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let fd = 0.5 * (fd_hess[i * n + j] + fd_hess[j * n + i]);
            report.hessian.update(i, j, hess[i * n + j], fd);
            if fd.abs() > NONZERO_TOL && !hdeclared[i * n + j] {
                report.missing_hessian += 1;
            }
        }
    }
    Ok(report)
}

/// Worst-case report over `options.points` seeded random interior points,
/// with multipliers drawn from `[-1, 1]`.
pub fn check_derivatives(model: &dyn Nlp, options: &CheckOptions) -> Result<DiffReport, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut total = DiffReport::default();
    for _ in 0..options.points {
        let x = random_interior_point(model, &mut rng);
        let mult: Vec<f64> = (0..model.ncon()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        total.merge(&check_at(model, &x, &mult, options.corrupt_jacobian)?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lv::luksan_vlcek;

    #[test]
    fn lv_passes_and_corruption_is_located() {
        let m = luksan_vlcek(10).unwrap().compile().unwrap();
        let r = check_derivatives(&m, &CheckOptions::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert_eq!((r.missing_jacobian, r.missing_hessian), (0, 0));

        let opts = CheckOptions { corrupt_jacobian: true, ..Default::default() };
        let r = check_derivatives(&m, &opts).unwrap();
        assert!(!r.passed());
        let (row, col) = m.jacobian_structure()[0];
        assert_eq!((r.jacobian.row, r.jacobian.col), (row, col));
    }
}
