//! Exact first- and second-order callbacks for a [`CompiledModel`].
//!
//! Every (kernel, record) term is differentiated on its own tape and written
//! into its own coordinate slots. Coordinate lists may therefore contain
//! duplicates; [`compress`] produces the summed form a solver consumes.

pub mod check;
pub mod tape;

use std::collections::HashMap;
use std::fmt;

use crate::model::{CompiledModel, CompiledTerm, ModelError};
use tape::{DomainFault, Scratch};

pub use tape::{TermTape, VarSlot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Objective,
    Constraint,
    Augment,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockKind::Objective => "objective",
            BlockKind::Constraint => "constraint",
            BlockKind::Augment => "augment",
        })
    }
}

/// Local lower-triangle pairs `(a, b)`, `a >= b`, of a `k`-slot term in
/// slot-major order.
pub(crate) fn hessian_pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(|a| (0..=a).map(move |b| (a, b)))
}

/// The evaluation contract consumed by the solver.
pub trait Nlp {
    fn nvar(&self) -> usize;
    fn ncon(&self) -> usize;
    fn x_lower(&self) -> &[f64];
    fn x_upper(&self) -> &[f64];
    fn g_lower(&self) -> &[f64];
    fn g_upper(&self) -> &[f64];
    fn start(&self) -> &[f64];

    fn eval_objective(&self, x: &[f64]) -> Result<f64, ModelError>;
    /// Overwrites `out` with the dense objective gradient.
    fn eval_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;
    /// Overwrites `out` with all row values, augments included.
    fn eval_constraints(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;
    fn jacobian_structure(&self) -> &[(usize, usize)];
    /// One value per Jacobian slot; duplicates are not summed.
    fn eval_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError>;
    /// Lower triangle, `row >= col`.
    fn hessian_structure(&self) -> &[(usize, usize)];
    /// Slots of `obj_weight * f + sum_i mult[i] * g_i`.
    fn eval_hessian(&self, x: &[f64], mult: &[f64], obj_weight: f64, out: &mut [f64]) -> Result<(), ModelError>;
}

fn fault(term: &CompiledTerm, record: usize) -> impl FnOnce(DomainFault) -> ModelError + '_ {
    move |f| ModelError::NumericDomain { kind: term.kind, block: term.id, record, op: f.op }
}

fn load(term: &CompiledTerm, record: usize, x: &[f64], scratch: &mut Scratch) {
    let k = scratch.local.len();
    for (s, &j) in term.flat[record * k..(record + 1) * k].iter().enumerate() {
        scratch.local[s] = x[j];
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::LengthMismatch { what: what.to_string(), expected, got });
    }
    Ok(())
}

impl CompiledModel {
    fn terms_of(&self, objective: bool) -> impl Iterator<Item = &CompiledTerm> {
        self.terms.iter().filter(move |t| (t.kind == BlockKind::Objective) == objective)
    }
}

impl Nlp for CompiledModel {
    fn nvar(&self) -> usize {
        self.nvar
    }

    fn ncon(&self) -> usize {
        self.ncon
    }

    fn x_lower(&self) -> &[f64] {
        &self.x_lower
    }

    fn x_upper(&self) -> &[f64] {
        &self.x_upper
    }

    fn g_lower(&self) -> &[f64] {
        &self.g_lower
    }

    fn g_upper(&self) -> &[f64] {
        &self.g_upper
    }

    fn start(&self) -> &[f64] {
        &self.start
    }

    fn eval_objective(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_len("x", self.nvar, x.len())?;
        let mut total = 0.0;
        for term in self.terms_of(true) {
            let mut scratch = Scratch::for_tape(&term.tape);
            for r in 0..term.table.len() {
                load(term, r, x, &mut scratch);
                total += term.tape.value(&term.table, r, &mut scratch).map_err(fault(term, r))?;
            }
        }
        Ok(total)
    }

    fn eval_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        check_len("x", self.nvar, x.len())?;
        check_len("gradient buffer", self.nvar, out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for term in self.terms_of(true) {
            let k = term.tape.num_locals();
            let mut scratch = Scratch::for_tape(&term.tape);
            for r in 0..term.table.len() {
                load(term, r, x, &mut scratch);
                term.tape.gradient(&term.table, r, &mut scratch).map_err(fault(term, r))?;
                for (s, &j) in term.flat[r * k..(r + 1) * k].iter().enumerate() {
                    out[j] += scratch.grad[s];
                }
            }
        }
        Ok(())
    }

    fn eval_constraints(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        check_len("x", self.nvar, x.len())?;
        check_len("constraint buffer", self.ncon, out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for term in self.terms_of(false) {
            let rows = term.rows.as_ref().expect("row terms carry rows");
            let mut scratch = Scratch::for_tape(&term.tape);
            for r in 0..term.table.len() {
                load(term, r, x, &mut scratch);
                out[rows[r]] += term.tape.value(&term.table, r, &mut scratch).map_err(fault(term, r))?;
            }
        }
        Ok(())
    }

    fn jacobian_structure(&self) -> &[(usize, usize)] {
        &self.jacobian
    }

    fn eval_jacobian(&self, x: &[f64], out: &mut [f64]) -> Result<(), ModelError> {
        check_len("x", self.nvar, x.len())?;
        check_len("jacobian buffer", self.jacobian.len(), out.len())?;
        for term in self.terms_of(false) {
            let k = term.tape.num_locals();
            let mut scratch = Scratch::for_tape(&term.tape);
            for r in 0..term.table.len() {
                load(term, r, x, &mut scratch);
                term.tape.gradient(&term.table, r, &mut scratch).map_err(fault(term, r))?;
                let base = term.jac_offset + r * k;
                out[base..base + k].copy_from_slice(&scratch.grad);
            }
        }
        Ok(())
    }

    fn hessian_structure(&self) -> &[(usize, usize)] {
        &self.hessian
    }

    fn eval_hessian(&self, x: &[f64], mult: &[f64], obj_weight: f64, out: &mut [f64]) -> Result<(), ModelError> {
        check_len("x", self.nvar, x.len())?;
        check_len("multipliers", self.ncon, mult.len())?;
        check_len("hessian buffer", self.hessian.len(), out.len())?;
        for term in &self.terms {
            let k = term.tape.num_locals();
            let npairs = k * (k + 1) / 2;
            let mut scratch = Scratch::for_tape(&term.tape);
            for r in 0..term.table.len() {
                let base = term.hess_offset + r * npairs;
                let slots = &mut out[base..base + npairs];
                let w = match &term.rows {
                    None => obj_weight,
                    Some(rows) => mult[rows[r]],
                };
                if w == 0.0 {
                    slots.iter_mut().for_each(|v| *v = 0.0);
                    continue;
                }
                load(term, r, x, &mut scratch);
                term.tape.hessian(&term.table, r, &mut scratch).map_err(fault(term, r))?;
                let vars = &term.flat[r * k..(r + 1) * k];
                for (slot, (a, b)) in slots.iter_mut().zip(hessian_pairs(k)) {
                    let h = scratch.hess[a * k + b];
                    // distinct slots on one variable land on the diagonal twice
                    *slot = if a != b && vars[a] == vars[b] { 2.0 * w * h } else { w * h };
                }
            }
        }
        Ok(())
    }
}

/// Deduplicated coordinates plus the slot-to-entry map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compressed {
    /// Unique coordinates, sorted by (row, col).
    pub coords: Vec<(usize, usize)>,
    /// `map[slot]` is the index in `coords` that raw slot `slot` sums into.
    pub map: Vec<usize>,
}

impl Compressed {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Sums raw slot values into `out` (overwritten).
    pub fn accumulate(&self, raw: &[f64], out: &mut [f64]) {
        debug_assert_eq!(raw.len(), self.map.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&m, &v) in self.map.iter().zip(raw) {
            out[m] += v;
        }
    }
}

pub fn compress(coords: &[(usize, usize)]) -> Compressed {
    let mut unique: Vec<(usize, usize)> = coords.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let position: HashMap<(usize, usize), usize> = unique.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let map = coords.iter().map(|c| position[c]).collect();
    Compressed { coords: unique, map }
}
