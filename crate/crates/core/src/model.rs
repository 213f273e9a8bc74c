//! Declarative model construction.
//!
//! A [`ModelCore`] collects variable blocks, objective blocks, constraint
//! blocks, and constraint augments. Objective and constraint blocks pair one
//! kernel with one [`DataTable`]; every record of the table contributes one
//! objective term or one constraint row. Augments add further kernel values
//! into rows that already exist. [`ModelCore::compile`] freezes the registry
//! into a [`CompiledModel`] with flattened bounds and precomputed sparsity.

use std::time::Instant;

use thiserror::Error;

use crate::autodiff::tape::{LowerError, TermTape};
use crate::autodiff::{hessian_pairs, BlockKind};
use crate::expr::Expr;
use crate::table::DataTable;

/// Name of the mandatory augment field holding the target row.
pub const ROW_FIELD: &str = "row";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid shape: every dimension must be positive")]
    InvalidShape,
    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch { what: String, expected: usize, got: usize },
    #[error("lower bound exceeds upper bound at element {index} ({lower} > {upper})")]
    InvertedBounds { index: usize, lower: f64, upper: f64 },
    #[error("kernel references unknown real field `{0}`")]
    UnknownField(String),
    #[error("kernel references unknown index field `{0}`")]
    UnknownIndexField(String),
    #[error("kernel references unregistered variable block {0}")]
    UnknownBlock(usize),
    #[error("index field `{field}` record {record}: value {value} outside block of length {len}")]
    IndexOutOfRange { field: String, record: usize, value: usize, len: usize },
    #[error("augment table has no integer `row` field")]
    MissingRowField,
    #[error("augment record {record} targets row {row} outside rows {start}..{end}")]
    RowOutOfRange { record: usize, row: usize, start: usize, end: usize },
    #[error("model has no variables")]
    NoVariables,
    #[error("numeric domain error in {op} ({kind} block {block}, record {record})")]
    NumericDomain { kind: BlockKind, block: usize, record: usize, op: &'static str },
    #[error("user callback: {0}")]
    Callback(Box<ModelError>),
    #[error("{0}")]
    Other(String),
}

/// Block shape. Grids flatten row-major: element `(r, c)` of an `R x C`
/// grid lives at local index `r * C + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Grid(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Grid(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            Shape::Vector(n) => vec![n],
            Shape::Grid(r, c) => vec![r, c],
        }
    }
}

impl From<usize> for Shape {
    fn from(n: usize) -> Self {
        Shape::Vector(n)
    }
}

impl From<(usize, usize)> for Shape {
    fn from((r, c): (usize, usize)) -> Self {
        Shape::Grid(r, c)
    }
}

/// A scalar broadcast or an explicit per-element array.
#[derive(Debug, Clone, PartialEq)]
pub enum Fill {
    Scalar(f64),
    Array(Vec<f64>),
}

impl Fill {
    fn expand(&self, what: &str, len: usize) -> Result<Vec<f64>, ModelError> {
        match self {
            Fill::Scalar(v) => Ok(vec![*v; len]),
            Fill::Array(a) if a.len() == len => Ok(a.clone()),
            Fill::Array(a) => Err(ModelError::LengthMismatch { what: what.to_string(), expected: len, got: a.len() }),
        }
    }
}

impl From<f64> for Fill {
    fn from(v: f64) -> Self {
        Fill::Scalar(v)
    }
}

impl From<Vec<f64>> for Fill {
    fn from(v: Vec<f64>) -> Self {
        Fill::Array(v)
    }
}

impl From<&[f64]> for Fill {
    fn from(v: &[f64]) -> Self {
        Fill::Array(v.to_vec())
    }
}

/// Handle to a registered variable block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableBlock {
    id: usize,
    offset: usize,
    shape: Shape,
}

impl VariableBlock {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Global index of the block's first element.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shape.is_empty()
    }

    /// Reference to `self[record.index_field]` inside a kernel.
    pub fn at(&self, index_field: &str) -> Expr {
        Expr::Var { block: self.id, index: index_field.to_string() }
    }

    /// Local flat index of grid element `(r, c)`; for vectors `c` must be 0.
    pub fn local(&self, r: usize, c: usize) -> usize {
        match self.shape {
            Shape::Vector(_) => {
                debug_assert_eq!(c, 0);
                r
            }
            Shape::Grid(_, cols) => r * cols + c,
        }
    }

    /// Global flat index of grid element `(r, c)`.
    pub fn global(&self, r: usize, c: usize) -> usize {
        self.offset + self.local(r, c)
    }

    /// Global index range covered by the block.
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveBlock {
    id: usize,
    len: usize,
}

impl ObjectiveBlock {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Number of terms `I_l`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Handle to a registered constraint block; records map to rows
/// `offset..offset + len` in record order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintBlock {
    id: usize,
    offset: usize,
    len: usize,
}

impl ConstraintBlock {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Global row of the block's `i`-th record.
    pub fn row(&self, i: usize) -> usize {
        debug_assert!(i < self.len);
        self.offset + i
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintAugment {
    id: usize,
    target: usize,
    len: usize,
}

impl ConstraintAugment {
    pub fn id(&self) -> usize {
        self.id
    }

    /// Id of the constraint block whose rows this augment adds into.
    pub fn target(&self) -> usize {
        self.target
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct VarData {
    handle: VariableBlock,
    lower: Vec<f64>,
    upper: Vec<f64>,
    start: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct TermData {
    tape: TermTape,
    table: DataTable,
}

#[derive(Debug, Clone, PartialEq)]
struct ConData {
    handle: ConstraintBlock,
    term: TermData,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct AugData {
    handle: ConstraintAugment,
    term: TermData,
    rows: Vec<usize>,
}

/// Mutable model registry.
#[derive(Debug, Clone)]
pub struct ModelCore {
    vars: Vec<VarData>,
    objectives: Vec<TermData>,
    constraints: Vec<ConData>,
    augments: Vec<AugData>,
    nvar: usize,
    ncon: usize,
    created: Instant,
}

impl Default for ModelCore {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for ModelCore {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
            && self.objectives == other.objectives
            && self.constraints == other.constraints
            && self.augments == other.augments
    }
}

/// Pushes `start` strictly inside `[lower, upper]` when it lies outside.
fn clamp_start(start: f64, lower: f64, upper: f64) -> f64 {
    let push = if lower.is_finite() && upper.is_finite() { (1e-2 * (upper - lower)).min(1e-2) } else { 1e-2 };
    if start < lower {
        (lower + push).min(upper)
    } else if start > upper {
        (upper - push).max(lower)
    } else {
        start
    }
}

impl ModelCore {
    pub fn new() -> Self {
        ModelCore {
            vars: Vec::new(),
            objectives: Vec::new(),
            constraints: Vec::new(),
            augments: Vec::new(),
            nvar: 0,
            ncon: 0,
            created: Instant::now(),
        }
    }

    pub fn nvar(&self) -> usize {
        self.nvar
    }

    pub fn ncon(&self) -> usize {
        self.ncon
    }

    pub fn variable_blocks(&self) -> impl Iterator<Item = VariableBlock> + '_ {
        self.vars.iter().map(|v| v.handle)
    }

    pub fn constraint_blocks(&self) -> impl Iterator<Item = ConstraintBlock> + '_ {
        self.constraints.iter().map(|c| c.handle)
    }

    /// Registers a variable block at the current offset.
    pub fn add_variable(
        &mut self,
        shape: impl Into<Shape>,
        lower: impl Into<Fill>,
        upper: impl Into<Fill>,
        start: impl Into<Fill>,
    ) -> Result<VariableBlock, ModelError> {
        let shape = shape.into();
        if shape.dims().contains(&0) {
            return Err(ModelError::InvalidShape);
        }
        let n = shape.len();
        let lower = lower.into().expand("variable lower bounds", n)?;
        let upper = upper.into().expand("variable upper bounds", n)?;
        let start = start.into().expand("variable start", n)?;
        if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
            return Err(ModelError::InvertedBounds { index: i, lower: lower[i], upper: upper[i] });
        }
        let handle = VariableBlock { id: self.vars.len(), offset: self.nvar, shape };
        self.vars.push(VarData { handle, lower, upper, start });
        self.nvar += n;
        Ok(handle)
    }

    /// Unbounded block starting at zero.
    pub fn add_free_variable(&mut self, shape: impl Into<Shape>) -> Result<VariableBlock, ModelError> {
        self.add_variable(shape, f64::NEG_INFINITY, f64::INFINITY, 0.0)
    }

    fn lower_term(&self, kernel: &Expr, table: DataTable) -> Result<TermData, ModelError> {
        let tape = TermTape::lower(kernel, &table).map_err(|e| match e {
            LowerError::UnknownField(f) => ModelError::UnknownField(f),
            LowerError::UnknownIndexField(f) => ModelError::UnknownIndexField(f),
        })?;
        for slot in tape.slots() {
            let var = self.vars.get(slot.block).ok_or(ModelError::UnknownBlock(slot.block))?;
            let len = var.handle.len();
            let col = table.index_column(slot.index_col);
            if let Some(record) = col.iter().position(|&v| v >= len) {
                let field = table.index_names().nth(slot.index_col).unwrap_or_default().to_string();
                return Err(ModelError::IndexOutOfRange { field, record, value: col[record], len });
            }
        }
        Ok(TermData { tape, table })
    }

    /// Adds the objective block `sum_i kernel(x; table[i])`.
    pub fn add_objective(&mut self, kernel: &Expr, table: DataTable) -> Result<ObjectiveBlock, ModelError> {
        let len = table.len();
        let term = self.lower_term(kernel, table)?;
        let handle = ObjectiveBlock { id: self.objectives.len(), len };
        self.objectives.push(term);
        Ok(handle)
    }

    /// Adds one constraint row `lower <= kernel(x; table[i]) <= upper` per record.
    pub fn add_constraint(
        &mut self,
        kernel: &Expr,
        table: DataTable,
        lower: impl Into<Fill>,
        upper: impl Into<Fill>,
    ) -> Result<ConstraintBlock, ModelError> {
        let len = table.len();
        let lower = lower.into().expand("constraint lower bounds", len)?;
        let upper = upper.into().expand("constraint upper bounds", len)?;
        if let Some(i) = (0..len).find(|&i| !(lower[i] <= upper[i])) {
            return Err(ModelError::InvertedBounds { index: i, lower: lower[i], upper: upper[i] });
        }
        let term = self.lower_term(kernel, table)?;
        let handle = ConstraintBlock { id: self.constraints.len(), offset: self.ncon, len };
        self.constraints.push(ConData { handle, term, lower, upper });
        self.ncon += len;
        Ok(handle)
    }

    /// Adds `kernel(x; table[k])` into global row `table[k].row` of `block`.
    pub fn modify_constraint(
        &mut self,
        block: &ConstraintBlock,
        kernel: &Expr,
        table: DataTable,
    ) -> Result<ConstraintAugment, ModelError> {
        let registered = self.constraints.get(block.id).map(|c| c.handle);
        if registered != Some(*block) {
            return Err(ModelError::Other(format!("constraint block {} is not registered in this core", block.id)));
        }
        let rows = table.index(ROW_FIELD).ok_or(ModelError::MissingRowField)?.to_vec();
        if let Some(record) = rows.iter().position(|r| !block.range().contains(r)) {
            let range = block.range();
            return Err(ModelError::RowOutOfRange { record, row: rows[record], start: range.start, end: range.end });
        }
        let len = table.len();
        let term = self.lower_term(kernel, table)?;
        let handle = ConstraintAugment { id: self.augments.len(), target: block.id, len };
        self.augments.push(AugData { handle, term, rows });
        Ok(handle)
    }

    /// Freezes the registry. Starts outside their bounds are pushed inside.
    pub fn compile(&self) -> Result<CompiledModel, ModelError> {
        if self.nvar == 0 {
            return Err(ModelError::NoVariables);
        }
        let mut x_lower = Vec::with_capacity(self.nvar);
        let mut x_upper = Vec::with_capacity(self.nvar);
        let mut start = Vec::with_capacity(self.nvar);
        for v in &self.vars {
            x_lower.extend_from_slice(&v.lower);
            x_upper.extend_from_slice(&v.upper);
            for i in 0..v.start.len() {
                start.push(clamp_start(v.start[i], v.lower[i], v.upper[i]));
            }
        }
        let mut g_lower = Vec::with_capacity(self.ncon);
        let mut g_upper = Vec::with_capacity(self.ncon);
        for c in &self.constraints {
            g_lower.extend_from_slice(&c.lower);
            g_upper.extend_from_slice(&c.upper);
        }

        let offsets: Vec<usize> = self.vars.iter().map(|v| v.handle.offset).collect();
        let make = |kind: BlockKind, id: usize, term: &TermData, rows: Option<Vec<usize>>| {
            let k = term.tape.num_locals();
            let n = term.table.len();
            let mut flat = Vec::with_capacity(n * k);
            for r in 0..n {
                for slot in term.tape.slots() {
                    flat.push(offsets[slot.block] + term.table.index_at(slot.index_col, r));
                }
            }
            CompiledTerm { kind, id, tape: term.tape.clone(), table: term.table.clone(), flat, rows, jac_offset: 0, hess_offset: 0 }
        };

        let mut terms = Vec::new();
        for (id, t) in self.objectives.iter().enumerate() {
            terms.push(make(BlockKind::Objective, id, t, None));
        }
        for c in &self.constraints {
            let rows = c.handle.range().collect();
            terms.push(make(BlockKind::Constraint, c.handle.id, &c.term, Some(rows)));
        }
        for a in &self.augments {
            terms.push(make(BlockKind::Augment, a.handle.id, &a.term, Some(a.rows.clone())));
        }

        let mut jacobian = Vec::new();
        let mut hessian = Vec::new();
        for t in &mut terms {
            let k = t.tape.num_locals();
            t.jac_offset = jacobian.len();
            t.hess_offset = hessian.len();
            for r in 0..t.table.len() {
                let vars = &t.flat[r * k..(r + 1) * k];
                if let Some(rows) = &t.rows {
                    jacobian.extend(vars.iter().map(|&c| (rows[r], c)));
                }
                hessian.extend(hessian_pairs(k).map(|(a, b)| {
                    let (fa, fb) = (vars[a], vars[b]);
                    (fa.max(fb), fa.min(fb))
                }));
            }
        }

        Ok(CompiledModel {
            nvar: self.nvar,
            ncon: self.ncon,
            x_lower,
            x_upper,
            start,
            g_lower,
            g_upper,
            var_blocks: self.vars.iter().map(|v| v.handle).collect(),
            con_blocks: self.constraints.iter().map(|c| c.handle).collect(),
            terms,
            jacobian,
            hessian,
            build_seconds: self.created.elapsed().as_secs_f64(),
        })
    }
}

/// One frozen objective block, constraint block, or augment.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CompiledTerm {
    pub(crate) kind: BlockKind,
    pub(crate) id: usize,
    pub(crate) tape: TermTape,
    pub(crate) table: DataTable,
    /// Global variable index of each (record, slot), row-major.
    pub(crate) flat: Vec<usize>,
    /// Target row per record; `None` for objective terms.
    pub(crate) rows: Option<Vec<usize>>,
    pub(crate) jac_offset: usize,
    pub(crate) hess_offset: usize,
}

/// Immutable flattened NLP
/// `min f(x)  s.t.  g_lower <= g(x) <= g_upper,  x_lower <= x <= x_upper`.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub(crate) nvar: usize,
    pub(crate) ncon: usize,
    pub(crate) x_lower: Vec<f64>,
    pub(crate) x_upper: Vec<f64>,
    pub(crate) start: Vec<f64>,
    pub(crate) g_lower: Vec<f64>,
    pub(crate) g_upper: Vec<f64>,
    pub(crate) var_blocks: Vec<VariableBlock>,
    pub(crate) con_blocks: Vec<ConstraintBlock>,
    pub(crate) terms: Vec<CompiledTerm>,
    pub(crate) jacobian: Vec<(usize, usize)>,
    pub(crate) hessian: Vec<(usize, usize)>,
    pub(crate) build_seconds: f64,
}

impl CompiledModel {
    pub fn nvar(&self) -> usize {
        self.nvar
    }

    pub fn ncon(&self) -> usize {
        self.ncon
    }

    pub fn x_lower(&self) -> &[f64] {
        &self.x_lower
    }

    pub fn x_upper(&self) -> &[f64] {
        &self.x_upper
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn g_lower(&self) -> &[f64] {
        &self.g_lower
    }

    pub fn g_upper(&self) -> &[f64] {
        &self.g_upper
    }

    pub fn variable_blocks(&self) -> &[VariableBlock] {
        &self.var_blocks
    }

    pub fn constraint_blocks(&self) -> &[ConstraintBlock] {
        &self.con_blocks
    }

    /// Seconds from core creation to the end of compilation.
    pub fn build_seconds(&self) -> f64 {
        self.build_seconds
    }

    /// Overrides the recorded model construction time.
    pub fn set_build_seconds(&mut self, seconds: f64) {
        self.build_seconds = seconds;
    }

    pub fn num_objective_blocks(&self) -> usize {
        self.terms.iter().filter(|t| t.kind == BlockKind::Objective).count()
    }

    pub fn num_augments(&self) -> usize {
        self.terms.iter().filter(|t| t.kind == BlockKind::Augment).count()
    }
}

/// Block values in their declared shape.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockValues {
    pub shape: Shape,
    pub values: Vec<f64>,
}

impl BlockValues {
    /// Element `(r, c)` of a grid (or `(i, 0)` of a vector).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.shape {
            Shape::Vector(_) => self.values[r],
            Shape::Grid(_, cols) => self.values[r * cols + c],
        }
    }

    /// Grid rows; a vector yields one row.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        match self.shape {
            Shape::Vector(_) => vec![self.values.clone()],
            Shape::Grid(_, cols) => self.values.chunks(cols).map(|c| c.to_vec()).collect(),
        }
    }
}

/// Slices one block out of a full solution vector.
pub fn extract_solution(x: &[f64], block: &VariableBlock, nvar: usize) -> Result<BlockValues, ModelError> {
    if x.len() != nvar {
        return Err(ModelError::LengthMismatch { what: "solution vector".into(), expected: nvar, got: x.len() });
    }
    if block.range().end > x.len() {
        return Err(ModelError::LengthMismatch { what: "block range".into(), expected: block.range().end, got: x.len() });
    }
    Ok(BlockValues { shape: block.shape, values: x[block.range()].to_vec() })
}

impl CompiledModel {
    pub fn solution(&self, x: &[f64], block: &VariableBlock) -> Result<BlockValues, ModelError> {
        extract_solution(x, block, self.nvar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_core() {
        let a = ModelCore::new();
        let mut b = ModelCore::new();
        assert_eq!((a.nvar(), a.ncon()), (0, 0));
        b.add_free_variable(3).unwrap();
        assert_eq!(b.nvar(), 3);
        assert_eq!(a.nvar(), 0);
    }

    #[test]
    fn variable_defaults_and_starts() {
        let mut core = ModelCore::new();
        let x = core.add_free_variable(3).unwrap();
        assert_eq!(x.range(), 0..3);
        let starts: Vec<f64> = (1..=4).map(|i| if i % 2 == 1 { -1.2 } else { 1.0 }).collect();
        let y = core.add_variable(4, f64::NEG_INFINITY, f64::INFINITY, starts).unwrap();
        let m = core.compile().unwrap();
        assert_eq!(&m.start()[..3], &[0.0; 3]);
        assert!(m.x_lower()[..3].iter().all(|v| *v == f64::NEG_INFINITY));
        assert_eq!(&m.start()[y.range()], &[-1.2, 1.0, -1.2, 1.0]);
    }

    #[test]
    fn grid_flattening_is_row_major() {
        let mut core = ModelCore::new();
        core.add_free_variable(2).unwrap();
        let g = core.add_free_variable((2, 3)).unwrap();
        assert_eq!(g.len(), 6);
        // second row, first column
        assert_eq!(g.global(1, 0), g.offset() + 3);
        assert_eq!(g.global(1, 2), 2 + 5);
    }

    #[test]
    fn variable_errors() {
        let mut core = ModelCore::new();
        assert_eq!(core.add_free_variable(0).unwrap_err(), ModelError::InvalidShape);
        assert_eq!(core.add_free_variable((2, 0)).unwrap_err(), ModelError::InvalidShape);
        assert!(matches!(
            core.add_variable(3, vec![0.0, 0.0], 1.0, 0.0).unwrap_err(),
            ModelError::LengthMismatch { expected: 3, got: 2, .. }
        ));
        assert!(matches!(
            core.add_variable(2, vec![0.0, 2.0], 1.0, 0.0).unwrap_err(),
            ModelError::InvertedBounds { index: 1, .. }
        ));
        assert_eq!(core.nvar(), 0);
    }

    #[test]
    fn start_clamping_pushes_inside() {
        assert_eq!(clamp_start(-5.0, 0.0, 10.0), 0.01);
        assert_eq!(clamp_start(5.0, 0.0, 1.0), 0.99);
        assert!((clamp_start(5.0, 0.0, 0.5) - 0.495).abs() < 1e-15);
        assert_eq!(clamp_start(-1.0, 0.0, f64::INFINITY), 0.01);
        assert_eq!(clamp_start(0.3, 0.0, 1.0), 0.3);
        assert_eq!(clamp_start(3.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn constraint_bounds_broadcast_and_errors() {
        let mut core = ModelCore::new();
        let x = core.add_free_variable(10).unwrap();
        let t = DataTable::new(10).with_index("i", (0..10).collect()).unwrap();
        let c = core.add_constraint(&x.at("i"), t.clone(), -1.0, 1.0).unwrap();
        assert_eq!(c.range(), 0..10);
        let m = core.compile().unwrap();
        assert!(m.g_lower().iter().all(|v| *v == -1.0));
        assert!(m.g_upper().iter().all(|v| *v == 1.0));

        assert!(matches!(
            core.add_constraint(&x.at("i"), t.clone(), 1.0, -1.0).unwrap_err(),
            ModelError::InvertedBounds { .. }
        ));
        assert_eq!(
            core.add_constraint(&x.at("j"), t.clone(), 0.0, 0.0).unwrap_err(),
            ModelError::UnknownIndexField("j".into())
        );
        let empty = core.add_constraint(&x.at("i"), DataTable::new(0).with_index("i", vec![]).unwrap(), 0.0, 0.0).unwrap();
        assert!(empty.is_empty());
        assert_eq!(core.ncon(), 10);
    }

    #[test]
    fn index_out_of_range_rejected() {
        let mut core = ModelCore::new();
        let x = core.add_free_variable(2).unwrap();
        let t = DataTable::new(1).with_index("i", vec![2]).unwrap();
        assert!(matches!(
            core.add_objective(&x.at("i"), t).unwrap_err(),
            ModelError::IndexOutOfRange { value: 2, len: 2, .. }
        ));
    }

    #[test]
    fn augment_row_checks() {
        let mut core = ModelCore::new();
        let x = core.add_free_variable(2).unwrap();
        let t = DataTable::new(2).with_index("i", vec![0, 1]).unwrap();
        core.add_constraint(&x.at("i"), t.clone(), 0.0, 0.0).unwrap();
        let c = core.add_constraint(&x.at("i"), t, 0.0, 0.0).unwrap();
        let no_row = DataTable::new(1).with_index("i", vec![0]).unwrap();
        assert_eq!(core.modify_constraint(&c, &x.at("i"), no_row).unwrap_err(), ModelError::MissingRowField);
        let bad = DataTable::new(1).with_index("i", vec![0]).unwrap().with_index(ROW_FIELD, vec![1]).unwrap();
        assert!(matches!(
            core.modify_constraint(&c, &x.at("i"), bad).unwrap_err(),
            ModelError::RowOutOfRange { row: 1, start: 2, end: 4, .. }
        ));
        let ok = DataTable::new(1).with_index("i", vec![0]).unwrap().with_index(ROW_FIELD, vec![3]).unwrap();
        let aug = core.modify_constraint(&c, &x.at("i"), ok).unwrap();
        assert_eq!(aug.target(), c.id());
        assert_eq!(core.ncon(), 4);
    }

    #[test]
    fn no_variables_cannot_compile() {
        assert_eq!(ModelCore::new().compile().unwrap_err(), ModelError::NoVariables);
    }

    #[test]
    fn extract_solution_shapes() {
        let mut core = ModelCore::new();
        let a = core.add_free_variable(2).unwrap();
        let b = core.add_free_variable(2).unwrap();
        let x = [9.0, 9.0, 1.0, 2.0];
        assert_eq!(extract_solution(&x, &b, 4).unwrap().values, vec![1.0, 2.0]);
        assert!(extract_solution(&x[..3], &a, 4).is_err());

        let mut core = ModelCore::new();
        let g = core.add_free_variable((2, 2)).unwrap();
        let v = extract_solution(&[1.0, 2.0, 3.0, 4.0], &g, 4).unwrap();
        assert_eq!(v.rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(v.get(1, 0), 3.0);
        assert_eq!(v.values, vec![1.0, 2.0, 3.0, 4.0]);
    }
}
