//! Python bindings: expressions, data tables, the model core, OPF builders,
//! and the interior-point solver.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use kernopt::autodiff::check::{check_derivatives, CheckOptions};
use kernopt::ipm::{self, SolverOptions};
use kernopt::matpower::{parse_case, read_case, CaseData};
use kernopt::opf::{mpopf_model, opf_model, Form, MultiPeriod, OpfModel};
use kernopt::{compress, CompiledModel, ConstraintBlock, DataTable, Expr, ModelCore, Nlp, VariableBlock};
use kernopt::{Fill, Shape};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn check_len(what: &str, got: usize, expected: usize) -> PyResult<()> {
    if got == expected {
        Ok(())
    } else {
        Err(PyIndexError::new_err(format!("{what}: expected length {expected}, got {got}")))
    }
}

/// A scalar kernel expression over variables and table fields.
#[pyclass(name = "Expr", module = "kernopt", from_py_object)]
#[derive(Clone)]
struct PyExpr(Expr);

#[derive(FromPyObject)]
enum Operand {
    Expr(PyExpr),
    Number(f64),
}

impl Operand {
    fn expr(self) -> Expr {
        match self {
            Operand::Expr(e) => e.0,
            Operand::Number(v) => Expr::from(v),
        }
    }
}

#[pymethods]
impl PyExpr {
    fn __add__(&self, o: Operand) -> PyExpr {
        PyExpr(self.0.clone() + o.expr())
    }
    fn __radd__(&self, o: Operand) -> PyExpr {
        PyExpr(o.expr() + self.0.clone())
    }
    fn __sub__(&self, o: Operand) -> PyExpr {
        PyExpr(self.0.clone() - o.expr())
    }
    fn __rsub__(&self, o: Operand) -> PyExpr {
        PyExpr(o.expr() - self.0.clone())
    }
    fn __mul__(&self, o: Operand) -> PyExpr {
        PyExpr(self.0.clone() * o.expr())
    }
    fn __rmul__(&self, o: Operand) -> PyExpr {
        PyExpr(o.expr() * self.0.clone())
    }
    fn __truediv__(&self, o: Operand) -> PyExpr {
        PyExpr(self.0.clone() / o.expr())
    }
    fn __rtruediv__(&self, o: Operand) -> PyExpr {
        PyExpr(o.expr() / self.0.clone())
    }
    fn __neg__(&self) -> PyExpr {
        PyExpr(-self.0.clone())
    }
    /// Integer exponents use the integer power node.
    fn __pow__(&self, o: Operand, _modulo: Option<Py<PyAny>>) -> PyExpr {
        match o {
            Operand::Number(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => PyExpr(self.0.clone().powi(v as i32)),
            other => PyExpr(self.0.clone().pow(other.expr())),
        }
    }
    fn sin(&self) -> PyExpr {
        PyExpr(self.0.clone().sin())
    }
    fn cos(&self) -> PyExpr {
        PyExpr(self.0.clone().cos())
    }
    fn exp(&self) -> PyExpr {
        PyExpr(self.0.clone().exp())
    }
    fn log(&self) -> PyExpr {
        PyExpr(self.0.clone().ln())
    }
    fn sqrt(&self) -> PyExpr {
        PyExpr(self.0.clone().sqrt())
    }
    fn size(&self) -> usize {
        self.0.size()
    }
    fn __repr__(&self) -> String {
        format!("Expr(size={})", self.0.size())
    }
}

/// Real field `name` of the current record.
#[pyfunction]
fn field(name: &str) -> PyExpr {
    PyExpr(kernopt::field(name))
}

#[pyfunction]
fn constant(value: f64) -> PyExpr {
    PyExpr(kernopt::constant(value))
}

/// Columnar records: named real and index fields of equal length.
#[pyclass(name = "Table", module = "kernopt", from_py_object)]
#[derive(Clone)]
struct PyTable(DataTable);

#[pymethods]
impl PyTable {
    #[new]
    fn new(len: usize) -> Self {
        PyTable(DataTable::new(len))
    }
    fn with_real(&self, name: &str, values: Vec<f64>) -> PyResult<PyTable> {
        self.0.clone().with_real(name, values).map(PyTable).map_err(err)
    }
    fn with_index(&self, name: &str, values: Vec<usize>) -> PyResult<PyTable> {
        self.0.clone().with_index(name, values).map(PyTable).map_err(err)
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "VariableBlock", module = "kernopt", from_py_object)]
#[derive(Clone, Copy)]
struct PyVariableBlock(VariableBlock);

#[pymethods]
impl PyVariableBlock {
    /// The variable selected by index field `index_field` of each record.
    fn at(&self, index_field: &str) -> PyExpr {
        PyExpr(self.0.at(index_field))
    }
    #[getter]
    fn offset(&self) -> usize {
        self.0.offset()
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().dims()
    }
    #[pyo3(signature = (r, c = 0))]
    fn index(&self, r: usize, c: usize) -> usize {
        self.0.global(r, c)
    }
}

#[pyclass(name = "ConstraintBlock", module = "kernopt", from_py_object)]
#[derive(Clone, Copy)]
struct PyConstraintBlock(ConstraintBlock);

#[pymethods]
impl PyConstraintBlock {
    #[getter]
    fn offset(&self) -> usize {
        self.0.offset()
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
    /// Global row of the block's `i`-th row.
    fn row(&self, i: usize) -> PyResult<usize> {
        if i < self.0.len() {
            Ok(self.0.row(i))
        } else {
            Err(PyIndexError::new_err(format!("row {i} outside block of {}", self.0.len())))
        }
    }
}

#[derive(FromPyObject)]
enum Values {
    Scalar(f64),
    Array(Vec<f64>),
}

impl Values {
    fn fill(self) -> Fill {
        match self {
            Values::Scalar(v) => v.into(),
            Values::Array(v) => v.into(),
        }
    }
}

/// Shape argument: `n` or `(rows, cols)`.
#[derive(FromPyObject)]
enum ShapeArg {
    Vector(usize),
    Grid((usize, usize)),
}

impl ShapeArg {
    fn shape(self) -> Shape {
        match self {
            ShapeArg::Vector(n) => n.into(),
            ShapeArg::Grid(rc) => rc.into(),
        }
    }
}

/// Mutable model under construction.
#[pyclass(name = "ModelCore", module = "kernopt")]
struct PyCore(ModelCore);

#[pymethods]
impl PyCore {
    #[new]
    fn new() -> Self {
        PyCore(ModelCore::new())
    }
    #[getter]
    fn nvar(&self) -> usize {
        self.0.nvar()
    }
    #[getter]
    fn ncon(&self) -> usize {
        self.0.ncon()
    }
    #[pyo3(signature = (shape, lower = Values::Scalar(f64::NEG_INFINITY), upper = Values::Scalar(f64::INFINITY), start = Values::Scalar(0.0)))]
    fn add_variable(&mut self, shape: ShapeArg, lower: Values, upper: Values, start: Values) -> PyResult<PyVariableBlock> {
        self.0.add_variable(shape.shape(), lower.fill(), upper.fill(), start.fill()).map(PyVariableBlock).map_err(err)
    }
    fn add_objective(&mut self, kernel: &PyExpr, table: &PyTable) -> PyResult<()> {
        self.0.add_objective(&kernel.0, table.0.clone()).map(|_| ()).map_err(err)
    }
    #[pyo3(signature = (kernel, table, lower = Values::Scalar(0.0), upper = Values::Scalar(0.0)))]
    fn add_constraint(&mut self, kernel: &PyExpr, table: &PyTable, lower: Values, upper: Values) -> PyResult<PyConstraintBlock> {
        self.0.add_constraint(&kernel.0, table.0.clone(), lower.fill(), upper.fill()).map(PyConstraintBlock).map_err(err)
    }
    /// Adds `kernel` into the rows named by the table's `row` index field.
    fn modify_constraint(&mut self, block: &PyConstraintBlock, kernel: &PyExpr, table: &PyTable) -> PyResult<()> {
        self.0.modify_constraint(&block.0, &kernel.0, table.0.clone()).map(|_| ()).map_err(err)
    }
    fn compile(&self) -> PyResult<PyModel> {
        let model = self.0.compile().map_err(err)?;
        Ok(PyModel { model, opf: None })
    }
}

/// A parsed MATPOWER case in per-unit.
#[pyclass(name = "Case", module = "kernopt")]
struct PyCase(CaseData);

#[pymethods]
impl PyCase {
    #[staticmethod]
    fn read(path: &str) -> PyResult<PyCase> {
        read_case(path).map(PyCase).map_err(err)
    }
    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyCase> {
        parse_case(text).map(PyCase).map_err(err)
    }
    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }
    #[getter]
    fn base_mva(&self) -> f64 {
        self.0.base_mva
    }
    #[getter]
    fn n_bus(&self) -> usize {
        self.0.buses.len()
    }
    #[getter]
    fn n_gen(&self) -> usize {
        self.0.gens.len()
    }
    #[getter]
    fn n_branch(&self) -> usize {
        self.0.branches.len()
    }
    #[getter]
    fn n_storage(&self) -> usize {
        self.0.storage.len()
    }
}

/// Outcome of [`PyModel::solve`].
#[pyclass(name = "SolveResult", module = "kernopt", get_all)]
struct PySolveResult {
    status: String,
    objective: f64,
    iterations: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    z_lower: Vec<f64>,
    z_upper: Vec<f64>,
    constraint_violation: f64,
    bound_violation: f64,
    timings: BTreeMap<String, f64>,
    kkt: BTreeMap<String, f64>,
}

#[pymethods]
impl PySolveResult {
    fn __repr__(&self) -> String {
        format!("SolveResult(status={}, objective={:.10e}, iterations={})", self.status, self.objective, self.iterations)
    }
}

/// A compiled model with its derivative callbacks.
#[pyclass(name = "Model", module = "kernopt")]
struct PyModel {
    model: CompiledModel,
    opf: Option<Box<OpfModel>>,
}

impl PyModel {
    fn from_opf(m: OpfModel) -> PyModel {
        PyModel { model: m.model.clone(), opf: Some(Box::new(m)) }
    }

    fn point(&self, x: &[f64]) -> PyResult<()> {
        check_len("x", x.len(), self.model.nvar())
    }
}

fn parse_form(form: &str) -> PyResult<Form> {
    form.parse().map_err(err)
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    #[pyo3(signature = (case, form = "polar"))]
    fn opf(case: &PyCase, form: &str) -> PyResult<PyModel> {
        opf_model(&case.0, parse_form(form)?, None).map(PyModel::from_opf).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (case, curve, form = "polar", corrective_action_ratio = 0.25, relax_complementarity = false))]
    fn mpopf(case: &PyCase, curve: Vec<f64>, form: &str, corrective_action_ratio: f64, relax_complementarity: bool) -> PyResult<PyModel> {
        let options = MultiPeriod { form: parse_form(form)?, corrective_action_ratio, relax_complementarity };
        mpopf_model(&case.0, &curve, options, None).map(PyModel::from_opf).map_err(err)
    }

    #[staticmethod]
    fn luksan_vlcek(n: usize) -> PyResult<PyModel> {
        let model = kernopt::lv::luksan_vlcek(n).and_then(|c| c.compile()).map_err(err)?;
        Ok(PyModel { model, opf: None })
    }

    #[getter]
    fn nvar(&self) -> usize {
        self.model.nvar()
    }
    #[getter]
    fn ncon(&self) -> usize {
        self.model.ncon()
    }
    fn start(&self) -> Vec<f64> {
        self.model.start().to_vec()
    }
    fn x_lower(&self) -> Vec<f64> {
        self.model.x_lower().to_vec()
    }
    fn x_upper(&self) -> Vec<f64> {
        self.model.x_upper().to_vec()
    }
    fn g_lower(&self) -> Vec<f64> {
        self.model.g_lower().to_vec()
    }
    fn g_upper(&self) -> Vec<f64> {
        self.model.g_upper().to_vec()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.point(&x)?;
        self.model.eval_objective(&x).map_err(err)
    }
    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.point(&x)?;
        let mut out = vec![0.0; self.model.nvar()];
        self.model.eval_gradient(&x, &mut out).map_err(err)?;
        Ok(out)
    }
    fn constraints(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.point(&x)?;
        let mut out = vec![0.0; self.model.ncon()];
        self.model.eval_constraints(&x, &mut out).map_err(err)?;
        Ok(out)
    }
    /// Compressed Jacobian as `(rows, cols, values)`.
    fn jacobian(&self, x: Vec<f64>) -> PyResult<(Vec<usize>, Vec<usize>, Vec<f64>)> {
        self.point(&x)?;
        let s = self.model.jacobian_structure();
        let mut raw = vec![0.0; s.len()];
        self.model.eval_jacobian(&x, &mut raw).map_err(err)?;
        Ok(triplets(s, &raw))
    }
    /// Compressed lower-triangle Lagrangian Hessian as `(rows, cols, values)`.
    #[pyo3(signature = (x, multipliers, obj_weight = 1.0))]
    fn hessian(&self, x: Vec<f64>, multipliers: Vec<f64>, obj_weight: f64) -> PyResult<(Vec<usize>, Vec<usize>, Vec<f64>)> {
        self.point(&x)?;
        check_len("multipliers", multipliers.len(), self.model.ncon())?;
        let s = self.model.hessian_structure();
        let mut raw = vec![0.0; s.len()];
        self.model.eval_hessian(&x, &multipliers, obj_weight, &mut raw).map_err(err)?;
        Ok(triplets(s, &raw))
    }
    fn constraint_violation(&self, x: Vec<f64>) -> PyResult<f64> {
        self.point(&x)?;
        Ok(ipm::constraint_violation(&self.model, &x))
    }

    #[pyo3(signature = (tol = 1e-8, max_iter = 3000, time_limit = None))]
    fn solve(&self, py: Python<'_>, tol: f64, max_iter: usize, time_limit: Option<f64>) -> PySolveResult {
        let options = SolverOptions {
            tol,
            max_iter,
            max_wall_seconds: time_limit.unwrap_or(f64::INFINITY),
            ..SolverOptions::default()
        };
        let r = py.detach(|| ipm::solve_model(&self.model, &options));
        let t = r.timings;
        let timings = [
            ("build_seconds", t.build_seconds),
            ("init_seconds", t.init_seconds),
            ("ad_seconds", t.ad_seconds),
            ("linsolve_seconds", t.linsolve_seconds),
            ("internal_seconds", t.internal_seconds),
            ("solve_seconds", t.solve_seconds),
        ];
        let kkt = [("stationarity", r.kkt.stationarity), ("primal", r.kkt.primal), ("complementarity", r.kkt.complementarity)];
        PySolveResult {
            status: r.status.to_string(),
            objective: r.objective,
            iterations: r.iterations,
            constraint_violation: r.constraint_violation,
            bound_violation: r.bound_violation,
            timings: timings.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            kkt: kkt.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            x: r.x,
            y: r.y,
            z_lower: r.z_lower,
            z_upper: r.z_upper,
        }
    }

    /// Worst finite-difference discrepancies as a dict.
    #[pyo3(signature = (points = 5, seed = 1))]
    fn check_derivatives(&self, points: usize, seed: u64) -> PyResult<BTreeMap<String, f64>> {
        let r = check_derivatives(&self.model, &CheckOptions { points, seed, corrupt_jacobian: false }).map_err(err)?;
        Ok(BTreeMap::from([
            ("gradient".to_string(), r.gradient.rel_err),
            ("jacobian".to_string(), r.jacobian.rel_err),
            ("hessian".to_string(), r.hessian.rel_err),
            ("missing_jacobian".to_string(), r.missing_jacobian as f64),
            ("missing_hessian".to_string(), r.missing_hessian as f64),
            ("passed".to_string(), if r.passed() { 1.0 } else { 0.0 }),
        ]))
    }

    /// Named OPF blocks of `x` as `{name: (shape, row-major values)}`.
    fn solution(&self, x: Vec<f64>) -> PyResult<BTreeMap<String, (Vec<usize>, Vec<f64>)>> {
        self.point(&x)?;
        match &self.opf {
            Some(m) => Ok(m.solution_blocks(&x).map_err(err)?.into_iter().map(|(n, b)| (n, (b.shape.dims(), b.values))).collect()),
            None => Ok(BTreeMap::from([("x".to_string(), (vec![x.len()], x))])),
        }
    }

    /// Named OPF variable blocks.
    fn variables(&self) -> BTreeMap<String, PyVariableBlock> {
        match &self.opf {
            Some(m) => m.vars.named().into_iter().map(|(n, b)| (n, PyVariableBlock(b))).collect(),
            None => self.model.variable_blocks().iter().enumerate().map(|(i, b)| (format!("x{i}"), PyVariableBlock(*b))).collect(),
        }
    }

    /// Named OPF constraint blocks.
    fn constraint_blocks(&self) -> BTreeMap<String, PyConstraintBlock> {
        match &self.opf {
            Some(m) => m.cons.named().into_iter().map(|(n, b)| (n, PyConstraintBlock(b))).collect(),
            None => self.model.constraint_blocks().iter().enumerate().map(|(i, b)| (format!("c{i}"), PyConstraintBlock(*b))).collect(),
        }
    }

    /// `max pc·pd` over storage devices; 0 without storage.
    fn complementarity_violation(&self, x: Vec<f64>) -> PyResult<f64> {
        self.point(&x)?;
        Ok(self.opf.as_ref().map_or(0.0, |m| m.complementarity_violation(&x)))
    }
}

fn triplets(coords: &[(usize, usize)], raw: &[f64]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let c = compress(coords);
    let mut values = vec![0.0; c.len()];
    c.accumulate(raw, &mut values);
    (c.coords.iter().map(|p| p.0).collect(), c.coords.iter().map(|p| p.1).collect(), values)
}

/// Shifted geometric mean `(∏(vᵢ + Δ))^{1/n} − Δ`.
#[pyfunction]
#[pyo3(signature = (values, shift = 10.0))]
fn sgm(values: Vec<f64>, shift: f64) -> f64 {
    kernopt::cli::sgm(&values, shift)
}

#[pymodule]
#[pyo3(name = "kernopt")]
fn kernopt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyVariableBlock>()?;
    m.add_class::<PyConstraintBlock>()?;
    m.add_class::<PyCore>()?;
    m.add_class::<PyCase>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(field, m)?)?;
    m.add_function(wrap_pyfunction!(constant, m)?)?;
    m.add_function(wrap_pyfunction!(sgm, m)?)?;
    Ok(())
}
