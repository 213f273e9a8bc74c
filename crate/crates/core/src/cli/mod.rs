//! The `kernopt` command-line front end.
//!
//! Exit codes: 0 on success, 2 on input errors, 3 when a solve is not
//! optimal or a derivative check fails.

pub mod bench;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::autodiff::check::{check_derivatives, CheckOptions, Worst, FIRST_ORDER_TOL, SECOND_ORDER_TOL};
use crate::autodiff::{compress, Nlp};
use crate::ipm::{kkt_residuals, solve_model, SolverOptions, Status};
use crate::lv::luksan_vlcek;
use crate::matpower::{parse_load_series, read_case};
use crate::model::CompiledModel;
use crate::opf::{mpopf_model, mpopf_model_series, opf_model, Form, MultiPeriod, OpfModel};
pub use bench::{sgm, summarize, BenchSummary, RunRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kernopt", version, about = "Build, check, and solve nonlinear optimal power flow models")]
pub struct Cli {
    /// Print a single JSON document instead of the text report.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case and report objective, status, violations, and timings.
    Solve(SolveArgs),
    /// Compare callback derivatives with central finite differences.
    Diffcheck(DiffcheckArgs),
    /// Solve several cases and summarize with shifted geometric means.
    Bench(BenchArgs),
    /// Print model dimensions, nonzero counts, and the block inventory.
    Inspect(ModelArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// MATPOWER case file, or `lv:N` for the Luksan-Vlcek problem.
    #[arg(long)]
    pub case: String,
    #[arg(long, default_value = "polar")]
    pub form: Form,
    /// Build a multi-period model from `--curve` or `--pd`/`--qd`.
    #[arg(long)]
    pub periods: bool,
    /// Per-period load multipliers.
    #[arg(long, value_delimiter = ',', requires = "periods", conflicts_with = "pd")]
    pub curve: Option<Vec<f64>>,
    /// Active load series, periods by buses, MW.
    #[arg(long, requires_all = ["periods", "qd"])]
    pub pd: Option<PathBuf>,
    /// Reactive load series, periods by buses, MVAr.
    #[arg(long, requires_all = ["periods", "pd"])]
    pub qd: Option<PathBuf>,
    /// Ramp limit as a fraction of each generator's output span.
    #[arg(long, default_value_t = 0.25)]
    pub car: f64,
    /// Drop the storage complementarity rows and report their violation.
    #[arg(long)]
    pub relax_complementarity: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 3000)]
    pub max_iter: usize,
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Write the solution as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiffcheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 5)]
    pub points: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub corrupt_jacobian: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub cases: Vec<String>,
    #[arg(long, default_value = "polar")]
    pub form: Form,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 600.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 10.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// Input failure carrying the exit code 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

fn input<E: std::fmt::Display>(e: E) -> InputError {
    InputError(e.to_string())
}

/// A built model: either a power flow model or the bare Luksan-Vlcek NLP.
#[derive(Debug, Clone)]
pub enum Built {
    Lv { name: String, model: CompiledModel },
    Opf { name: String, model: Box<OpfModel> },
}

impl Built {
    pub fn name(&self) -> &str {
        match self {
            Built::Lv { name, .. } | Built::Opf { name, .. } => name,
        }
    }

    pub fn model(&self) -> &CompiledModel {
        match self {
            Built::Lv { model, .. } => model,
            Built::Opf { model, .. } => &model.model,
        }
    }

    pub fn form(&self) -> String {
        match self {
            Built::Lv { .. } => "none".into(),
            Built::Opf { model, .. } => model.form.to_string(),
        }
    }

    pub fn periods(&self) -> usize {
        match self {
            Built::Lv { .. } => 1,
            Built::Opf { model, .. } => model.periods,
        }
    }

    fn has_storage(&self) -> bool {
        matches!(self, Built::Opf { model, .. } if model.vars.storage.is_some())
    }

    /// Named blocks of `x`, row-major.
    pub fn solution_blocks(&self, x: &[f64]) -> Result<Vec<Value>, InputError> {
        let blocks = match self {
            Built::Lv { model, .. } => {
                let b = model.variable_blocks()[0];
                vec![("x".to_string(), model.solution(x, &b).map_err(input)?)]
            }
            Built::Opf { model, .. } => model.solution_blocks(x).map_err(input)?,
        };
        Ok(blocks
            .into_iter()
            .map(|(name, v)| json!({ "name": name, "shape": v.shape.dims(), "values": v.values }))
            .collect())
    }
}

fn case_label(case: &str) -> String {
    if case.starts_with("lv:") {
        return case.to_string();
    }
    Path::new(case).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| case.to_string())
}

/// Reads and builds the model described by `args`.
pub fn build(args: &ModelArgs) -> Result<Built, InputError> {
    let name = case_label(&args.case);
    if let Some(n) = args.case.strip_prefix("lv:") {
        let n: usize = n.parse().map_err(|_| InputError(format!("bad builtin case `{}`", args.case)))?;
        let model = luksan_vlcek(n).and_then(|c| c.compile()).map_err(input)?;
        return Ok(Built::Lv { name, model });
    }
    let case = read_case(&args.case).map_err(|e| InputError(format!("{}: {e}", args.case)))?;
    let options = MultiPeriod {
        form: args.form,
        corrective_action_ratio: args.car,
        relax_complementarity: args.relax_complementarity,
    };
    let model = match (&args.curve, &args.pd, &args.qd) {
        _ if !args.periods => opf_model(&case, args.form, None),
        (Some(curve), _, _) => mpopf_model(&case, curve, options, None),
        (None, Some(pd), Some(qd)) => {
            let read = |p: &PathBuf| {
                std::fs::read_to_string(p)
                    .map_err(|e| InputError(format!("{}: {e}", p.display())))
                    .and_then(|t| parse_load_series(&t, case.buses.len(), case.base_mva).map_err(input))
            };
            let (pd, qd) = (read(pd)?, read(qd)?);
            mpopf_model_series(&case, &pd, &qd, options, None)
        }
        _ => return Err(InputError("--periods needs --curve or both --pd and --qd".into())),
    }
    .map_err(input)?;
    Ok(Built::Opf { name, model: Box::new(model) })
}

/// Solves a built model and collects its run record.
pub fn run_solve(built: &Built, options: &SolverOptions) -> (RunRecord, crate::ipm::SolveResult) {
    let t = Instant::now();
    let r = solve_model(built.model(), options);
    let wall = t.elapsed().as_secs_f64() + built.model().build_seconds();
    let complementarity_violation = match built {
        Built::Opf { model, .. } if built.has_storage() => Some(model.complementarity_violation(&r.x)),
        _ => None,
    };
    let record = RunRecord {
        case: built.name().to_string(),
        form: built.form(),
        periods: built.periods(),
        tol: options.tol,
        status: r.status,
        objective: r.objective,
        iterations: r.iterations,
        wall_seconds: wall,
        constraint_violation: r.constraint_violation,
        complementarity_violation,
        timings: r.timings,
        error: None,
    };
    (record, r)
}

fn cmd_solve(args: &SolveArgs, json_out: bool, out: &mut dyn Write) -> Result<i32, InputError> {
    let built = build(&args.model)?;
    let options = SolverOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        max_wall_seconds: args.time_limit.unwrap_or(f64::INFINITY),
        ..SolverOptions::default()
    };
    let (record, r) = run_solve(&built, &options);
    let kkt = kkt_residuals(built.model(), &r.x, &r.y, &r.z_lower, &r.z_upper);
    if let Some(path) = &args.out {
        let doc = json!({
            "case": record.case,
            "form": record.form,
            "periods": record.periods,
            "status": record.status,
            "objective": record.objective,
            "complementarity_violation": record.complementarity_violation,
            "blocks": built.solution_blocks(&r.x)?,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(input)?;
        std::fs::write(path, text + "\n").map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    }
    if json_out {
        let mut doc = serde_json::to_value(&record).map_err(input)?;
        doc["bound_violation"] = json!(r.bound_violation);
        doc["kkt"] = serde_json::to_value(kkt).map_err(input)?;
        writeln!(out, "{doc}").map_err(input)?;
    } else {
        let t = &record.timings;
        let mut lines = vec![
            format!("case                      {}", record.case),
            format!("form                      {}", record.form),
            format!("periods                   {}", record.periods),
            format!("status                    {}", record.status),
            format!("objective                 {:.12e}", record.objective),
            format!("iterations                {}", record.iterations),
            format!("constraint_violation      {:.3e}", record.constraint_violation),
            format!("bound_violation           {:.3e}", r.bound_violation),
        ];
        if let Some(c) = record.complementarity_violation {
            lines.push(format!("complementarity_violation {c:.17e}"));
        }
        lines.extend([
            format!("kkt_stationarity          {:.3e}", kkt.stationarity),
            format!("kkt_primal                {:.3e}", kkt.primal),
            format!("kkt_complementarity       {:.3e}", kkt.complementarity),
            format!("build_seconds             {:.6}", t.build_seconds),
            format!("init_seconds              {:.6}", t.init_seconds),
            format!("ad_seconds                {:.6}", t.ad_seconds),
            format!("linsolve_seconds          {:.6}", t.linsolve_seconds),
            format!("internal_seconds          {:.6}", t.internal_seconds),
            format!("solve_seconds             {:.6}", t.solve_seconds),
        ]);
        for l in lines {
            writeln!(out, "{l}").map_err(input)?;
        }
    }
    Ok(if r.status == Status::Optimal { EXIT_OK } else { EXIT_FAILED })
}

fn worst_json(w: &Worst) -> Value {
    json!({ "row": w.row, "col": w.col, "analytic": w.analytic, "fd": w.fd, "rel_err": w.rel_err })
}

fn cmd_diffcheck(args: &DiffcheckArgs, json_out: bool, out: &mut dyn Write) -> Result<i32, InputError> {
    let built = build(&args.model)?;
    let options = CheckOptions { points: args.points, seed: args.seed, corrupt_jacobian: args.corrupt_jacobian };
    let report = check_derivatives(built.model(), &options).map_err(input)?;
    let passed = report.passed();
    if json_out {
        let doc = json!({
            "case": built.name(),
            "form": built.form(),
            "points": args.points,
            "seed": args.seed,
            "passed": passed,
            "gradient": worst_json(&report.gradient),
            "jacobian": worst_json(&report.jacobian),
            "hessian": worst_json(&report.hessian),
            "missing_jacobian": report.missing_jacobian,
            "missing_hessian": report.missing_hessian,
        });
        writeln!(out, "{doc}").map_err(input)?;
    } else {
        let checks = [
            ("gradient", &report.gradient, FIRST_ORDER_TOL),
            ("jacobian", &report.jacobian, FIRST_ORDER_TOL),
            ("hessian", &report.hessian, SECOND_ORDER_TOL),
        ];
        for (name, w, tol) in checks {
            let verdict = if w.rel_err <= tol { "ok" } else { "FAIL" };
            write!(out, "{name:<9} max_rel_err {:.3e} (threshold {tol:.0e}) {verdict}", w.rel_err).map_err(input)?;
            if w.rel_err > tol {
                write!(out, " at ({}, {}): analytic {:.10e} fd {:.10e}", w.row, w.col, w.analytic, w.fd).map_err(input)?;
            }
            writeln!(out).map_err(input)?;
        }
        writeln!(out, "missing jacobian entries {}", report.missing_jacobian).map_err(input)?;
        writeln!(out, "missing hessian entries  {}", report.missing_hessian).map_err(input)?;
    }
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

fn bench_one(case: &str, args: &BenchArgs) -> RunRecord {
    let model_args = ModelArgs {
        case: case.to_string(),
        form: args.form,
        periods: false,
        curve: None,
        pd: None,
        qd: None,
        car: 0.25,
        relax_complementarity: false,
    };
    let options = SolverOptions { tol: args.tol, max_wall_seconds: args.time_limit, ..SolverOptions::default() };
    match build(&model_args) {
        Ok(built) => run_solve(&built, &options).0,
        Err(e) => RunRecord {
            case: case_label(case),
            form: args.form.to_string(),
            periods: 1,
            tol: args.tol,
            status: Status::NumericFailure,
            objective: f64::NAN,
            iterations: 0,
            wall_seconds: args.time_limit,
            constraint_violation: f64::INFINITY,
            complementarity_violation: None,
            timings: Default::default(),
            error: Some(e.0),
        },
    }
}

/// Runs every case, `jobs` at a time; records keep the input order.
pub fn bench_records(args: &BenchArgs) -> Vec<RunRecord> {
    let jobs = args.jobs.max(1).min(args.cases.len().max(1));
    let mut slots: Vec<Option<RunRecord>> = vec![None; args.cases.len()];
    std::thread::scope(|scope| {
        let chunks: Vec<_> = slots.chunks_mut(args.cases.len().div_ceil(jobs).max(1)).collect();
        let mut start = 0;
        for chunk in chunks {
            let cases = &args.cases[start..start + chunk.len()];
            start += chunk.len();
            scope.spawn(move || {
                for (slot, case) in chunk.iter_mut().zip(cases) {
                    *slot = Some(bench_one(case, args));
                }
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every case ran")).collect()
}

fn cmd_bench(args: &BenchArgs, json_out: bool, out: &mut dyn Write) -> Result<i32, InputError> {
    let records = bench_records(args);
    let summary = summarize(&records, args.time_limit, args.shift);
    if json_out {
        let doc = json!({ "records": records, "summary": summary });
        writeln!(out, "{doc}").map_err(input)?;
    } else {
        for r in &records {
            writeln!(out, "{}", r.to_line()).map_err(input)?;
        }
        writeln!(
            out,
            "summary cases={} solved={} shift={} time_sgm={:.6} violation_sgm={:.3e}",
            summary.cases, summary.solved, summary.shift, summary.time_sgm, summary.violation_sgm
        )
        .map_err(input)?;
    }
    Ok(EXIT_OK)
}

fn cmd_inspect(args: &ModelArgs, json_out: bool, out: &mut dyn Write) -> Result<i32, InputError> {
    let built = build(args)?;
    let m = built.model();
    let (jac, hess) = (m.jacobian_structure(), m.hessian_structure());
    let (jac_c, hess_c) = (compress(jac).len(), compress(hess).len());
    let (vars, cons): (Vec<(String, usize, usize)>, Vec<(String, usize, usize)>) = match &built {
        Built::Lv { model, .. } => (
            model.variable_blocks().iter().map(|b| ("x".to_string(), b.offset(), b.len())).collect(),
            model.constraint_blocks().iter().enumerate().map(|(i, b)| (format!("c{i}"), b.offset(), b.len())).collect(),
        ),
        Built::Opf { model, .. } => (
            model.vars.named().into_iter().map(|(n, b)| (n, b.offset(), b.len())).collect(),
            model.cons.named().into_iter().map(|(n, b)| (n, b.offset(), b.len())).collect(),
        ),
    };
    if json_out {
        let blocks = |v: &[(String, usize, usize)]| -> Vec<Value> {
            v.iter().map(|(n, o, l)| json!({ "name": n, "offset": o, "len": l })).collect()
        };
        let doc = json!({
            "case": built.name(),
            "form": built.form(),
            "periods": built.periods(),
            "nvar": m.nvar(),
            "ncon": m.ncon(),
            "jacobian_raw": jac.len(),
            "jacobian_compressed": jac_c,
            "hessian_raw": hess.len(),
            "hessian_compressed": hess_c,
            "variables": blocks(&vars),
            "constraints": blocks(&cons),
        });
        writeln!(out, "{doc}").map_err(input)?;
    } else {
        let mut lines = vec![
            format!("case      {}", built.name()),
            format!("form      {}", built.form()),
            format!("periods   {}", built.periods()),
            format!("nvar      {}", m.nvar()),
            format!("ncon      {}", m.ncon()),
            format!("jacobian  raw {} compressed {}", jac.len(), jac_c),
            format!("hessian   raw {} compressed {}", hess.len(), hess_c),
        ];
        lines.extend(vars.iter().map(|(n, o, l)| format!("variable   {n:<28} offset {o:>6} len {l}")));
        lines.extend(cons.iter().map(|(n, o, l)| format!("constraint {n:<28} offset {o:>6} len {l}")));
        for l in lines {
            writeln!(out, "{l}").map_err(input)?;
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, cli.json, out),
        Command::Diffcheck(a) => cmd_diffcheck(a, cli.json, out),
        Command::Bench(a) => cmd_bench(a, cli.json, out),
        Command::Inspect(a) => cmd_inspect(a, cli.json, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

/// [`run_with`] on the process arguments and standard streams.
pub fn run() -> i32 {
    let (stdout, stderr) = (std::io::stdout(), std::io::stderr());
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests;
