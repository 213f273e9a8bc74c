//! Primal-dual interior-point solver for [`Nlp`] models.
//!
//! Inequality rows get slacks `s` bounded by the row bounds; equality rows
//! and variable bounds enter the barrier problem directly. Each iteration
//! solves the reduced primal-dual Newton system with a dense symmetric
//! indefinite factorization, corrects its inertia by primal and dual
//! regularization, and globalizes with an ℓ1 merit backtracking search.
//! Fixed variables (`lower == upper`) are held at their value and removed
//! from the Newton system.

pub mod ldl;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::autodiff::{compress, Compressed, Nlp};
use ldl::{sym_matvec, Inertia, Ldl};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Scaled KKT error at which the solve stops.
    pub tol: f64,
    pub max_iter: usize,
    pub max_wall_seconds: f64,
    pub mu_init: f64,
    /// Lower bound of the fraction-to-boundary factor.
    pub tau_min: f64,
    /// First trial primal regularization.
    pub delta_w_min: f64,
    /// Regularization beyond which the factorization is declared failed.
    pub delta_w_max: f64,
    /// Dual regularization used when the KKT matrix is singular.
    pub delta_c: f64,
    /// Relative relaxation applied to every finite bound.
    pub bound_relax: f64,
    pub print_level: u8,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 3000,
            max_wall_seconds: f64::INFINITY,
            mu_init: 1e-1,
            tau_min: 0.995,
            delta_w_min: 1e-8,
            delta_w_max: 1e40,
            delta_c: 1e-8,
            bound_relax: 0.0,
            print_level: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    MaxIter,
    TimeLimit,
    InfeasibleDetected,
    NumericFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::MaxIter => "max_iter",
            Status::TimeLimit => "time_limit",
            Status::InfeasibleDetected => "infeasible_detected",
            Status::NumericFailure => "numeric_failure",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Wall-clock breakdown in seconds. `init + ad + linsolve + internal`
/// equals the solve wall time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub build_seconds: f64,
    pub init_seconds: f64,
    pub ad_seconds: f64,
    pub linsolve_seconds: f64,
    pub internal_seconds: f64,
    pub solve_seconds: f64,
}

/// Unscaled first-order residuals of a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    pub x: Vec<f64>,
    /// Row multipliers, Lagrangian `f + yᵀg`.
    pub y: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub mu: f64,
    pub timings: Timings,
    pub kkt: KktResiduals,
    pub constraint_violation: f64,
    pub bound_violation: f64,
}

/// `max(‖g♭ − g‖∞, ‖g − g♯‖∞)` with negative parts clamped to zero.
pub fn constraint_violation(model: &dyn Nlp, x: &[f64]) -> f64 {
    let mut g = vec![0.0; model.ncon()];
    if model.eval_constraints(x, &mut g).is_err() {
        return f64::INFINITY;
    }
    row_violation(&g, model.g_lower(), model.g_upper())
}

/// Row violation of precomputed values `g`.
pub fn row_violation(g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let below = g.iter().zip(lower).map(|(g, l)| (l - g).max(0.0)).fold(0.0, f64::max);
    let above = g.iter().zip(upper).map(|(g, u)| (g - u).max(0.0)).fold(0.0, f64::max);
    below.max(above)
}

pub fn bound_violation(model: &dyn Nlp, x: &[f64]) -> f64 {
    row_violation(x, model.x_lower(), model.x_upper())
}

/// Recomputes stationarity, primal infeasibility, and complementarity.
///
/// A positive row multiplier pairs with the row's upper bound and a
/// negative one with its lower bound.
pub fn kkt_residuals(model: &dyn Nlp, x: &[f64], y: &[f64], z_lower: &[f64], z_upper: &[f64]) -> KktResiduals {
    let (n, m) = (model.nvar(), model.ncon());
    let mut grad = vec![0.0; n];
    let mut g = vec![0.0; m];
    let coords = model.jacobian_structure().to_vec();
    let mut jac = vec![0.0; coords.len()];
    if model.eval_gradient(x, &mut grad).is_err()
        || model.eval_constraints(x, &mut g).is_err()
        || model.eval_jacobian(x, &mut jac).is_err()
    {
        return KktResiduals { stationarity: f64::INFINITY, primal: f64::INFINITY, complementarity: f64::INFINITY };
    }
    for (&(r, c), v) in coords.iter().zip(&jac) {
        grad[c] += y[r] * v;
    }
    let mut stationarity: f64 = 0.0;
    for i in 0..n {
        stationarity = stationarity.max((grad[i] - z_lower[i] + z_upper[i]).abs());
    }
    let (gl, gu) = (model.g_lower(), model.g_upper());
    let mut complementarity: f64 = 0.0;
    for i in 0..m {
        if gl[i] == gu[i] {
            continue;
        }
        let (bound, dist) = if y[i] > 0.0 { (gu[i], gu[i] - g[i]) } else { (gl[i], g[i] - gl[i]) };
        if bound.is_finite() {
            complementarity = complementarity.max((y[i] * dist).abs());
        } else {
            stationarity = stationarity.max(y[i].abs());
        }
    }
    let (xl, xu) = (model.x_lower(), model.x_upper());
    for i in 0..n {
        if xl[i] == xu[i] {
            continue;
        }
        if xl[i].is_finite() {
            complementarity = complementarity.max((z_lower[i] * (x[i] - xl[i])).abs());
        }
        if xu[i].is_finite() {
            complementarity = complementarity.max((z_upper[i] * (xu[i] - x[i])).abs());
        }
    }
    let primal = row_violation(&g, gl, gu).max(row_violation(x, xl, xu));
    KktResiduals { stationarity, primal, complementarity }
}

/// Callback wrapper that accumulates evaluation time.
struct Timed<'a> {
    model: &'a dyn Nlp,
    ad: Duration,
}

impl<'a> Timed<'a> {
    fn time<T>(&mut self, f: impl FnOnce(&dyn Nlp) -> T) -> T {
        let t = Instant::now();
        let out = f(self.model);
        self.ad += t.elapsed();
        out
    }
}

/// Problem data in the reduced `w = (x_free, s)` space.
struct Reduced {
    n_x: usize,
    free: Vec<usize>,
    /// Reduced column of each original variable, if free.
    col_of: Vec<Option<usize>>,
    /// Inequality rows, in row order; slack `k` belongs to `ineq[k]`.
    ineq: Vec<usize>,
    slack_of: Vec<Option<usize>>,
    eq_target: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    jac: Compressed,
    hess: Compressed,
    jac_raw: Vec<(usize, usize)>,
    hess_raw: Vec<(usize, usize)>,
}

impl Reduced {
    fn n(&self) -> usize {
        self.lower.len()
    }
}

#[derive(Clone)]
struct Point {
    x: Vec<f64>,
    s: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

/// Evaluated first-order data at an iterate.
struct Derivs {
    grad: Vec<f64>,
    jac: Vec<f64>,
}

fn relax(b: f64, factor: f64, sign: f64) -> f64 {
    if b.is_finite() {
        b + sign * factor * b.abs().max(1.0)
    } else {
        b
    }
}

/// Moves `v` strictly inside `[l, u]`.
fn push_inside(v: f64, l: f64, u: f64) -> f64 {
    let (k1, k2) = (1e-2, 1e-2);
    let pl = if l.is_finite() {
        let mut p = k1 * l.abs().max(1.0);
        if u.is_finite() {
            p = p.min(k2 * (u - l));
        }
        Some(l + p)
    } else {
        None
    };
    let pu = if u.is_finite() {
        let mut p = k1 * u.abs().max(1.0);
        if l.is_finite() {
            p = p.min(k2 * (u - l));
        }
        Some(u - p)
    } else {
        None
    };
    match (pl, pu) {
        (Some(a), Some(b)) if a > b => 0.5 * (l + u),
        _ => {
            let mut v = v;
            if let Some(a) = pl {
                v = v.max(a);
            }
            if let Some(b) = pu {
                v = v.min(b);
            }
            v
        }
    }
}

struct Solver<'a> {
    ev: Timed<'a>,
    red: Reduced,
    opts: &'a SolverOptions,
    lin: Duration,
    m: usize,
}

impl<'a> Solver<'a> {
    fn nvar(&self) -> usize {
        self.ev.model.nvar()
    }

    /// Objective and rows at `x`; `None` on a domain error or non-finite value.
    fn evaluate(&mut self, x: &[f64], s: &[f64]) -> Option<Point> {
        let m = self.m;
        let f = self.ev.time(|nlp| nlp.eval_objective(x)).ok()?;
        let mut g = vec![0.0; m];
        self.ev.time(|nlp| nlp.eval_constraints(x, &mut g)).ok()?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Point { x: x.to_vec(), s: s.to_vec(), f, g })
    }

    fn derivs(&mut self, x: &[f64]) -> Option<Derivs> {
        let mut grad = vec![0.0; self.nvar()];
        self.ev.time(|nlp| nlp.eval_gradient(x, &mut grad)).ok()?;
        let mut raw = vec![0.0; self.red.jac_raw.len()];
        self.ev.time(|nlp| nlp.eval_jacobian(x, &mut raw)).ok()?;
        let mut jac = vec![0.0; self.red.jac.len()];
        self.red.jac.accumulate(&raw, &mut jac);
        if grad.iter().chain(&jac).any(|v| !v.is_finite()) {
            return None;
        }
        Some(Derivs { grad, jac })
    }

    fn hessian(&mut self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        let mut raw = vec![0.0; self.red.hess_raw.len()];
        self.ev.time(|nlp| nlp.eval_hessian(x, y, 1.0, &mut raw)).ok()?;
        let mut h = vec![0.0; self.red.hess.len()];
        self.red.hess.accumulate(&raw, &mut h);
        if h.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(h)
    }

    /// Reduced primal vector `w = (x_free, s)`.
    fn w_of(&self, p: &Point) -> Vec<f64> {
        self.red.free.iter().map(|&i| p.x[i]).chain(p.s.iter().copied()).collect()
    }

    fn point_from_w(&self, base: &Point, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut x = base.x.clone();
        for (k, &i) in self.red.free.iter().enumerate() {
            x[i] = w[k];
        }
        (x, w[self.red.n_x..].to_vec())
    }

    /// Residuals `c(w)`: equality rows minus target, inequality rows minus slack.
    fn residual(&self, p: &Point) -> Vec<f64> {
        (0..self.m)
            .map(|i| match self.red.slack_of[i] {
                Some(k) => p.g[i] - p.s[k],
                None => p.g[i] - self.red.eq_target[i],
            })
            .collect()
    }

    /// `∇f + Jᵀy` in reduced space (without bound multipliers).
    fn lagrangian_gradient(&self, d: &Derivs, y: &[f64]) -> Vec<f64> {
        let n = self.red.n();
        let mut out = vec![0.0; n];
        for (k, &i) in self.red.free.iter().enumerate() {
            out[k] = d.grad[i];
        }
        for (&(r, c), v) in self.red.jac.coords.iter().zip(&d.jac) {
            if let Some(k) = self.red.col_of[c] {
                out[k] += y[r] * v;
            }
        }
        for (k, &r) in self.red.ineq.iter().enumerate() {
            out[self.red.n_x + k] -= y[r];
        }
        out
    }

    fn barrier(&self, p: &Point, mu: f64) -> f64 {
        let w = self.w_of(p);
        let mut phi = p.f;
        for (i, &wi) in w.iter().enumerate() {
            if self.red.lower[i].is_finite() {
                phi -= mu * (wi - self.red.lower[i]).ln();
            }
            if self.red.upper[i].is_finite() {
                phi -= mu * (self.red.upper[i] - wi).ln();
            }
        }
        phi
    }
}

/// Solves `model` from its start point.
pub fn solve(model: &dyn Nlp, options: &SolverOptions) -> SolveResult {
    let t_start = Instant::now();
    let ev = Timed { model, ad: Duration::ZERO };
    let (nvar, m) = (model.nvar(), model.ncon());
    let (xl, xu, gl, gu) = (model.x_lower(), model.x_upper(), model.g_lower(), model.g_upper());

    // problem reduction
    let free: Vec<usize> = (0..nvar).filter(|&i| xl[i] != xu[i]).collect();
    let mut col_of = vec![None; nvar];
    for (k, &i) in free.iter().enumerate() {
        col_of[i] = Some(k);
    }
    let ineq: Vec<usize> = (0..m).filter(|&i| gl[i] != gu[i]).collect();
    let mut slack_of = vec![None; m];
    for (k, &i) in ineq.iter().enumerate() {
        slack_of[i] = Some(k);
    }
    let r = options.bound_relax;
    let lower: Vec<f64> = free.iter().map(|&i| xl[i]).chain(ineq.iter().map(|&i| gl[i])).map(|b| relax(b, r, -1.0)).collect();
    let upper: Vec<f64> = free.iter().map(|&i| xu[i]).chain(ineq.iter().map(|&i| gu[i])).map(|b| relax(b, r, 1.0)).collect();
    let jac_raw = model.jacobian_structure().to_vec();
    let hess_raw = model.hessian_structure().to_vec();
    let red = Reduced {
        n_x: free.len(),
        free,
        col_of,
        ineq,
        slack_of,
        eq_target: gl.to_vec(),
        lower,
        upper,
        jac: compress(&jac_raw),
        hess: compress(&hess_raw),
        jac_raw,
        hess_raw,
    };
    let mut x0 = model.start().to_vec();
    for i in 0..nvar {
        x0[i] = if xl[i] == xu[i] { xl[i] } else { push_inside(x0[i], red.lower[red.col_of[i].unwrap()], red.upper[red.col_of[i].unwrap()]) };
    }
    let mut solver = Solver { ev, red, opts: options, lin: Duration::ZERO, m };
    let mut state = State::new(&mut solver, x0, t_start);
    state.run(&mut solver);
    state.finish(&mut solver, t_start)
}

struct State {
    p: Point,
    y: Vec<f64>,
    zl: Vec<f64>,
    zu: Vec<f64>,
    mu: f64,
    nu: f64,
    delta_w_last: f64,
    iter: usize,
    status: Option<Status>,
    failures: usize,
    init: Duration,
}

impl State {
    fn new(s: &mut Solver<'_>, x0: Vec<f64>, t_start: Instant) -> State {
        let n = s.red.n();
        let mut dummy = Point { x: x0.clone(), s: vec![0.0; s.red.ineq.len()], f: 0.0, g: vec![0.0; s.m] };
        let evaluated = s.evaluate(&x0, &dummy.s.clone());
        let mut status = None;
        match evaluated {
            Some(p) => {
                let slacks: Vec<f64> = s
                    .red
                    .ineq
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| {
                        let j = s.red.n_x + k;
                        push_inside(p.g[r], s.red.lower[j], s.red.upper[j])
                    })
                    .collect();
                dummy = Point { s: slacks, ..p };
            }
            None => status = Some(Status::NumericFailure),
        }
        let zl = (0..n).map(|i| if s.red.lower[i].is_finite() { 1.0 } else { 0.0 }).collect();
        let zu = (0..n).map(|i| if s.red.upper[i].is_finite() { 1.0 } else { 0.0 }).collect();
        let elapsed = t_start.elapsed();
        State {
            p: dummy,
            y: vec![0.0; s.m],
            zl,
            zu,
            mu: s.opts.mu_init,
            nu: 1.0,
            delta_w_last: 0.0,
            iter: 0,
            status,
            failures: 0,
            init: elapsed.saturating_sub(s.ev.ad),
        }
    }

    /// Scaled optimality error of the barrier problem with parameter `mu`,
    /// plus the unscaled stationarity and complementarity.
    fn error(&self, s: &Solver<'_>, lg: &[f64], c: &[f64], mu: f64) -> (f64, f64, f64) {
        let w = s.w_of(&self.p);
        let n = w.len();
        let mut dual: f64 = 0.0;
        for i in 0..n {
            dual = dual.max((lg[i] - self.zl[i] + self.zu[i]).abs());
        }
        let primal = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut comp: f64 = 0.0;
        let mut zsum = 0.0;
        let mut nz = 0usize;
        for i in 0..n {
            if s.red.lower[i].is_finite() {
                comp = comp.max((self.zl[i] * (w[i] - s.red.lower[i]) - mu).abs());
                zsum += self.zl[i].abs();
                nz += 1;
            }
            if s.red.upper[i].is_finite() {
                comp = comp.max((self.zu[i] * (s.red.upper[i] - w[i]) - mu).abs());
                zsum += self.zu[i].abs();
                nz += 1;
            }
        }
        let s_max: f64 = 100.0;
        let ysum: f64 = self.y.iter().map(|v| v.abs()).sum();
        let sd = (s_max.max((ysum + zsum) / ((s.m + nz).max(1) as f64))) / s_max;
        let sc = (s_max.max(zsum / (nz.max(1) as f64))) / s_max;
        ((dual / sd).max(primal).max(comp / sc), dual, comp)
    }

    fn run(&mut self, s: &mut Solver<'_>) {
        if self.status.is_some() {
            return;
        }
        let tol = s.opts.tol;
        let mu_min = tol / 11.0;
        let mut d = match s.derivs(&self.p.x.clone()) {
            Some(d) => d,
            None => {
                self.status = Some(Status::NumericFailure);
                return;
            }
        };
        let t0 = Instant::now();
        loop {
            let c = s.residual(&self.p);
            let lg = s.lagrangian_gradient(&d, &self.y);
            let (e0, dual_unscaled, comp_unscaled) = self.error(s, &lg, &c, 0.0);
            if s.opts.print_level > 0 {
                eprintln!("iter {:4} f {:+.10e} err {:.3e} mu {:.2e} nu {:.2e}", self.iter, self.p.f, e0, self.mu, self.nu);
            }
            if e0 <= tol && dual_unscaled <= 10.0 * tol && comp_unscaled <= 10.0 * tol {
                self.status = Some(Status::Optimal);
                return;
            }
            if self.iter >= s.opts.max_iter {
                self.status = Some(Status::MaxIter);
                return;
            }
            if t0.elapsed().as_secs_f64() + self.init.as_secs_f64() > s.opts.max_wall_seconds {
                self.status = Some(Status::TimeLimit);
                return;
            }
            // monotone barrier update
            loop {
                let (emu, _, _) = self.error(s, &lg, &c, self.mu);
                if emu <= 10.0 * self.mu && self.mu > mu_min {
                    self.mu = (0.2 * self.mu).max(mu_min);
                } else {
                    break;
                }
            }
            match self.step(s, &d, &c, &lg) {
                Ok(()) => {}
                Err(status) => {
                    self.status = Some(status);
                    return;
                }
            }
            self.iter += 1;
            d = match s.derivs(&self.p.x.clone()) {
                Some(d) => d,
                None => {
                    self.status = Some(Status::NumericFailure);
                    return;
                }
            };
        }
    }

    /// Assembles the lower triangle of the regularized KKT matrix.
    fn kkt_matrix(&self, s: &Solver<'_>, d: &Derivs, h: &[f64], sigma: &[f64]) -> Vec<f64> {
        let n = s.red.n();
        let dim = n + s.m;
        let mut k = vec![0.0; dim * dim];
        for (&(r, c), v) in s.red.hess.coords.iter().zip(h) {
            if let (Some(a), Some(b)) = (s.red.col_of[r], s.red.col_of[c]) {
                k[a * dim + b] += v;
            }
        }
        for i in 0..n {
            k[i * dim + i] += sigma[i];
        }
        for (&(r, c), v) in s.red.jac.coords.iter().zip(&d.jac) {
            if let Some(b) = s.red.col_of[c] {
                k[(n + r) * dim + b] += v;
            }
        }
        for (j, &r) in s.red.ineq.iter().enumerate() {
            k[(n + r) * dim + s.red.n_x + j] = -1.0;
        }
        k
    }

    /// Factors with inertia correction; returns the factor and `δ_w`.
    fn factor(&mut self, s: &mut Solver<'_>, base: &[f64]) -> Option<(Ldl, Vec<f64>, f64)> {
        let n = s.red.n();
        let dim = n + s.m;
        let mut dw = 0.0;
        let mut dc = 0.0;
        let mut first = true;
        loop {
            let mut k = base.to_vec();
            for i in 0..n {
                k[i * dim + i] += dw;
            }
            for i in n..dim {
                k[i * dim + i] -= dc;
            }
            let t = Instant::now();
            let f = Ldl::factor(dim, k.clone(), 1e-14);
            s.lin += t.elapsed();
            let Inertia { positive, negative, zero } = f.inertia();
            if positive == n && negative == s.m && zero == 0 {
                if dw > 0.0 {
                    self.delta_w_last = dw;
                }
                return Some((f, k, dw));
            }
            if zero > 0 && dc == 0.0 && s.m > 0 {
                dc = s.opts.delta_c;
                continue;
            }
            dw = if first {
                if self.delta_w_last == 0.0 {
                    s.opts.delta_w_min
                } else {
                    s.opts.delta_w_min.max(self.delta_w_last / 4.0)
                }
            } else {
                2.0 * dw
            };
            first = false;
            if dw > s.opts.delta_w_max {
                return None;
            }
        }
    }

    /// Solves `K d = rhs` with two steps of iterative refinement.
    fn solve_kkt(s: &mut Solver<'_>, f: &Ldl, k: &[f64], rhs: &[f64]) -> Vec<f64> {
        let t = Instant::now();
        let dim = rhs.len();
        let mut sol = rhs.to_vec();
        f.solve(&mut sol);
        let mut kx = vec![0.0; dim];
        for _ in 0..2 {
            sym_matvec(dim, k, &sol, &mut kx);
            let mut r: Vec<f64> = rhs.iter().zip(&kx).map(|(b, a)| b - a).collect();
            f.solve(&mut r);
            sol.iter_mut().zip(&r).for_each(|(v, dv)| *v += dv);
        }
        s.lin += t.elapsed();
        sol
    }

    fn max_step(&self, s: &Solver<'_>, w: &[f64], dw: &[f64], tau: f64) -> f64 {
        let mut alpha: f64 = 1.0;
        for i in 0..w.len() {
            if dw[i] < 0.0 && s.red.lower[i].is_finite() {
                alpha = alpha.min(-tau * (w[i] - s.red.lower[i]) / dw[i]);
            }
            if dw[i] > 0.0 && s.red.upper[i].is_finite() {
                alpha = alpha.min(tau * (s.red.upper[i] - w[i]) / dw[i]);
            }
        }
        alpha
    }

    fn trial(&self, s: &mut Solver<'_>, w: &[f64], dw: &[f64], alpha: f64) -> Option<Point> {
        let wt: Vec<f64> = w.iter().zip(dw).map(|(a, b)| a + alpha * b).collect();
        let (x, sl) = s.point_from_w(&self.p, &wt);
        s.evaluate(&x, &sl)
    }

    fn merit(&self, s: &Solver<'_>, p: &Point) -> f64 {
        let c1: f64 = s.residual(p).iter().map(|v| v.abs()).sum();
        s.barrier(p, self.mu) + self.nu * c1
    }

    fn step(&mut self, s: &mut Solver<'_>, d: &Derivs, c: &[f64], lg: &[f64]) -> Result<(), Status> {
        let n = s.red.n();
        let dim = n + s.m;
        let mu = self.mu;
        let tau = s.opts.tau_min.max(1.0 - mu);
        let w = s.w_of(&self.p);
        let h = s.hessian(&self.p.x.clone(), &self.y).ok_or(Status::NumericFailure)?;
        let sigma: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = 0.0;
                if s.red.lower[i].is_finite() {
                    v += self.zl[i] / (w[i] - s.red.lower[i]);
                }
                if s.red.upper[i].is_finite() {
                    v += self.zu[i] / (s.red.upper[i] - w[i]);
                }
                v
            })
            .collect();
        let base = self.kkt_matrix(s, d, &h, &sigma);
        let Some((f, kreg, _dw)) = self.factor(s, &base) else {
            if s.opts.print_level > 0 {
                eprintln!("inertia correction failed");
            }
            return Err(Status::NumericFailure);
        };

        // ∇φ_μ + Jᵀy
        let mut grad_phi = vec![0.0; n];
        for i in 0..n {
            let mut g = lg[i];
            if s.red.lower[i].is_finite() {
                g -= mu / (w[i] - s.red.lower[i]);
            }
            if s.red.upper[i].is_finite() {
                g += mu / (s.red.upper[i] - w[i]);
            }
            grad_phi[i] = g;
        }
        let mut rhs: Vec<f64> = grad_phi.iter().map(|v| -v).chain(c.iter().map(|v| -v)).collect();
        let sol = Self::solve_kkt(s, &f, &kreg, &rhs);
        let (dw, dy) = sol.split_at(n);

        // barrier gradient without the multiplier term
        let mut bgrad = grad_phi.clone();
        let mut jty = vec![0.0; n];
        for (&(r, cidx), v) in s.red.jac.coords.iter().zip(&d.jac) {
            if let Some(k) = s.red.col_of[cidx] {
                jty[k] += self.y[r] * v;
            }
        }
        for (k, &r) in s.red.ineq.iter().enumerate() {
            jty[s.red.n_x + k] -= self.y[r];
        }
        bgrad.iter_mut().zip(&jty).for_each(|(a, b)| *a -= b);

        let c1: f64 = c.iter().map(|v| v.abs()).sum();
        let gtd: f64 = bgrad.iter().zip(dw).map(|(a, b)| a * b).sum();
        // dᵀ(W + Σ + δ_w)d from the regularized matrix
        let mut pad = vec![0.0; dim];
        pad[..n].copy_from_slice(dw);
        let mut kd = vec![0.0; dim];
        sym_matvec(dim, &kreg, &pad, &mut kd);
        let dhd: f64 = kd[..n].iter().zip(dw).map(|(a, b)| a * b).sum();
        let ynew = self.y.iter().zip(dy).fold(0.0f64, |a, (y, d)| a.max((y + d).abs()));
        if c1 > 0.0 {
            let sigma_flag = if dhd > 0.0 { 0.5 * dhd } else { 0.0 };
            let needed = ((gtd + sigma_flag) / ((1.0 - 0.1) * c1)).max(ynew);
            if self.nu < needed {
                self.nu = needed.max(1.1 * self.nu);
            }
        }
        if self.nu > 1e20 {
            return Err(Status::InfeasibleDetected);
        }
        let dir = gtd - self.nu * c1;
        let merit0 = self.merit(s, &self.p);
        let slop = 10.0 * f64::EPSILON * merit0.abs().max(1.0);
        let eta = 1e-4;

        let alpha_max = self.max_step(s, &w, dw, tau);
        let mut alpha = alpha_max;
        let mut accepted: Option<(Point, f64)> = None;
        let tiny_step = dw.iter().zip(&w).all(|(a, b)| a.abs() <= 10.0 * f64::EPSILON * (1.0 + b.abs()));
        if tiny_step {
            if let Some(p) = self.trial(s, &w, dw, alpha) {
                accepted = Some((p, alpha));
            }
        }
        let mut first = true;
        while accepted.is_none() && alpha > 1e-16 {
            let trial = self.trial(s, &w, dw, alpha);
            if let Some(p) = trial {
                let mt = self.merit(s, &p);
                if mt <= merit0 + eta * alpha * dir + slop {
                    accepted = Some((p, alpha));
                    break;
                }
                let ct = s.residual(&p);
                let theta_t: f64 = ct.iter().map(|v| v.abs()).sum();
                if first && theta_t >= c1 {
                    // second-order correction on the full step
                    let mut c_soc: Vec<f64> = c.iter().zip(&ct).map(|(a, b)| alpha * a + b).collect();
                    for _ in 0..2 {
                        rhs = grad_phi.iter().map(|v| -v).chain(c_soc.iter().map(|v| -v)).collect();
                        let soc = Self::solve_kkt(s, &f, &kreg, &rhs);
                        let a_soc = self.max_step(s, &w, &soc[..n], tau);
                        let Some(ps) = self.trial(s, &w, &soc[..n], a_soc) else { break };
                        if self.merit(s, &ps) <= merit0 + eta * alpha * dir + slop {
                            self.accept(s, ps, &w, &soc[..n], &soc[n..], a_soc, tau);
                            self.failures = 0;
                            return Ok(());
                        }
                        let cs = s.residual(&ps);
                        c_soc = c_soc.iter().zip(&cs).map(|(a, b)| a_soc * a + b).collect();
                    }
                }
            }
            first = false;
            alpha *= 0.5;
        }
        let (p, alpha) = match accepted {
            Some(pa) => {
                self.failures = 0;
                pa
            }
            None => {
                self.failures += 1;
                if s.opts.print_level > 0 {
                    eprintln!("line search failed, forcing step");
                }
                if self.failures >= 10 {
                    return Err(Status::NumericFailure);
                }
                // forced step to escape a stalled search
                let a = alpha_max;
                match self.trial(s, &w, dw, a) {
                    Some(p) => (p, a),
                    None => return Err(Status::NumericFailure),
                }
            }
        };
        self.accept(s, p, &w, dw, dy, alpha, tau);
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn accept(&mut self, s: &Solver<'_>, p: Point, w: &[f64], dw: &[f64], dy: &[f64], alpha: f64, tau: f64) {
        let n = w.len();
        let mu = self.mu;
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for i in 0..n {
            if s.red.lower[i].is_finite() {
                let sl = w[i] - s.red.lower[i];
                dzl[i] = (mu - self.zl[i] * sl - self.zl[i] * dw[i]) / sl;
            }
            if s.red.upper[i].is_finite() {
                let su = s.red.upper[i] - w[i];
                dzu[i] = (mu - self.zu[i] * su + self.zu[i] * dw[i]) / su;
            }
        }
        let mut alpha_z: f64 = 1.0;
        for i in 0..n {
            if dzl[i] < 0.0 {
                alpha_z = alpha_z.min(-tau * self.zl[i] / dzl[i]);
            }
            if dzu[i] < 0.0 {
                alpha_z = alpha_z.min(-tau * self.zu[i] / dzu[i]);
            }
        }
        self.p = p;
        self.y.iter_mut().zip(dy).for_each(|(y, d)| *y += alpha * d);
        let wn = s.w_of(&self.p);
        let kappa = 1e10;
        for i in 0..n {
            if s.red.lower[i].is_finite() {
                let sl = wn[i] - s.red.lower[i];
                let z = self.zl[i] + alpha_z * dzl[i];
                self.zl[i] = z.clamp(mu / (kappa * sl), kappa * mu / sl);
            }
            if s.red.upper[i].is_finite() {
                let su = s.red.upper[i] - wn[i];
                let z = self.zu[i] + alpha_z * dzu[i];
                self.zu[i] = z.clamp(mu / (kappa * su), kappa * mu / su);
            }
        }
    }

    fn finish(self, s: &mut Solver<'_>, t_start: Instant) -> SolveResult {
        let model = s.ev.model;
        let nvar = model.nvar();
        let x = self.p.x.clone();
        let mut z_lower = vec![0.0; nvar];
        let mut z_upper = vec![0.0; nvar];
        for (k, &i) in s.red.free.iter().enumerate() {
            z_lower[i] = self.zl[k];
            z_upper[i] = self.zu[k];
        }
        // fixed variables: multipliers from stationarity
        if s.red.free.len() < nvar {
            let mut grad = vec![0.0; nvar];
            let coords = model.jacobian_structure().to_vec();
            let mut jac = vec![0.0; coords.len()];
            let ok = s.ev.time(|nlp| nlp.eval_gradient(&x, &mut grad).and_then(|_| nlp.eval_jacobian(&x, &mut jac)));
            if ok.is_ok() {
                for (&(r, c), v) in coords.iter().zip(&jac) {
                    grad[c] += self.y[r] * v;
                }
                for i in 0..nvar {
                    if s.red.col_of[i].is_none() {
                        if grad[i] >= 0.0 {
                            z_lower[i] = grad[i];
                        } else {
                            z_upper[i] = -grad[i];
                        }
                    }
                }
            }
        }
        let solve_wall = t_start.elapsed();
        let ad = s.ev.ad.as_secs_f64();
        let lin = s.lin.as_secs_f64();
        let init = self.init.as_secs_f64();
        let total = solve_wall.as_secs_f64();
        let internal = (total - init - ad - lin).max(0.0);
        let kkt = kkt_residuals(model, &x, &self.y, &z_lower, &z_upper);
        SolveResult {
            status: self.status.unwrap_or(Status::NumericFailure),
            objective: self.p.f,
            constraint_violation: row_violation(&self.p.g, model.g_lower(), model.g_upper()),
            bound_violation: bound_violation(model, &x),
            x,
            y: self.y,
            z_lower,
            z_upper,
            iterations: self.iter,
            mu: self.mu,
            timings: Timings {
                build_seconds: 0.0,
                init_seconds: init,
                ad_seconds: ad,
                linsolve_seconds: lin,
                internal_seconds: internal,
                solve_seconds: total,
            },
            kkt,
        }
    }
}

/// [`solve`] for a compiled model, recording its build time.
pub fn solve_model(model: &crate::CompiledModel, options: &SolverOptions) -> SolveResult {
    let mut r = solve(model, options);
    r.timings.build_seconds = model.build_seconds();
    r
}

#[cfg(test)]
mod tests;
