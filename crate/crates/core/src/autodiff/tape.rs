//! Per-kernel evaluation tapes.
//!
//! A [`TermTape`] is a kernel lowered to a postorder instruction list. Each
//! kernel term is differentiated on its own: one reverse sweep gives the
//! local gradient over the term's distinct variable slots, and one
//! forward-over-reverse sweep per slot gives a column of the local Hessian.

use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::table::DataTable;

/// One distinct `block[index_field]` reference inside a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSlot {
    pub block: usize,
    /// Column id of the index field in the bound table.
    pub index_col: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Op {
    Const(f64),
    Field(usize),
    Var(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    PowInt(usize, i32),
    PowConst(usize, f64),
}

/// A numeric-domain violation raised while evaluating a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainFault {
    pub op: &'static str,
}

/// Name-resolution failure while lowering an [`Expr`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LowerError {
    UnknownField(String),
    UnknownIndexField(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermTape {
    ops: Vec<Op>,
    slots: Vec<VarSlot>,
}

/// Reusable per-call buffers, sized for one tape.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    vals: Vec<f64>,
    adj: Vec<f64>,
    tan: Vec<f64>,
    adjt: Vec<f64>,
    partials: Vec<[f64; 5]>,
    pub(crate) local: Vec<f64>,
    pub(crate) grad: Vec<f64>,
    pub(crate) hess: Vec<f64>,
}

impl Scratch {
    pub(crate) fn for_tape(tape: &TermTape) -> Self {
        let n = tape.ops.len();
        let k = tape.slots.len();
        Scratch {
            vals: vec![0.0; n],
            adj: vec![0.0; n],
            tan: vec![0.0; n],
            adjt: vec![0.0; n],
            partials: vec![[0.0; 5]; n],
            local: vec![0.0; k],
            grad: vec![0.0; k],
            hess: vec![0.0; k * k],
        }
    }
}

impl TermTape {
    pub(crate) fn lower(expr: &Expr, table: &DataTable) -> Result<Self, LowerError> {
        let mut tape = TermTape { ops: Vec::with_capacity(expr.size()), slots: Vec::new() };
        tape.push(expr, table)?;
        Ok(tape)
    }

    fn push(&mut self, expr: &Expr, table: &DataTable) -> Result<usize, LowerError> {
        let op = match expr {
            Expr::Constant(v) => Op::Const(*v),
            Expr::Field(name) => {
                let col = table.real_id(name).ok_or_else(|| LowerError::UnknownField(name.clone()))?;
                Op::Field(col)
            }
            Expr::Var { block, index } => {
                let index_col = table
                    .index_id(index)
                    .ok_or_else(|| LowerError::UnknownIndexField(index.clone()))?;
                let slot = VarSlot { block: *block, index_col };
                let s = match self.slots.iter().position(|&x| x == slot) {
                    Some(s) => s,
                    None => {
                        self.slots.push(slot);
                        self.slots.len() - 1
                    }
                };
                Op::Var(s)
            }
            Expr::Unary(op, child) => {
                let c = self.push(child, table)?;
                Op::Unary(*op, c)
            }
            Expr::Binary(BinaryOp::Pow, base, exponent) => {
                let b = self.push(base, table)?;
                match **exponent {
                    Expr::Constant(c) if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 => Op::PowInt(b, c as i32),
                    Expr::Constant(c) => Op::PowConst(b, c),
                    _ => {
                        let e = self.push(exponent, table)?;
                        Op::Binary(BinaryOp::Pow, b, e)
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                let l = self.push(l, table)?;
                let r = self.push(r, table)?;
                Op::Binary(*op, l, r)
            }
        };
        self.ops.push(op);
        Ok(self.ops.len() - 1)
    }

    /// Distinct variable slots, in first-appearance order.
    pub fn slots(&self) -> &[VarSlot] {
        &self.slots
    }

    /// Number of local variables `k`.
    pub fn num_locals(&self) -> usize {
        self.slots.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.ops.len()
    }

    /// Forward sweep. `strict` additionally rejects points where the
    /// derivative is unbounded (e.g. `sqrt` at 0).
    fn forward(
        &self,
        table: &DataTable,
        record: usize,
        local: &[f64],
        vals: &mut [f64],
        strict: bool,
    ) -> Result<f64, DomainFault> {
        for (n, op) in self.ops.iter().enumerate() {
            vals[n] = match *op {
                Op::Const(v) => v,
                Op::Field(col) => table.real_at(col, record),
                Op::Var(s) => local[s],
                Op::Unary(u, c) => {
                    let x = vals[c];
                    match u {
                        UnaryOp::Neg => -x,
                        UnaryOp::Sin => x.sin(),
                        UnaryOp::Cos => x.cos(),
                        UnaryOp::Exp => x.exp(),
                        UnaryOp::Log => {
                            if x <= 0.0 {
                                return Err(DomainFault { op: "log" });
                            }
                            x.ln()
                        }
                        UnaryOp::Sqrt => {
                            if x < 0.0 || (strict && x == 0.0) {
                                return Err(DomainFault { op: "sqrt" });
                            }
                            x.sqrt()
                        }
                    }
                }
                Op::Binary(b, l, r) => {
                    let (x, y) = (vals[l], vals[r]);
                    match b {
                        BinaryOp::Add => x + y,
                        BinaryOp::Sub => x - y,
                        BinaryOp::Mul => x * y,
                        BinaryOp::Div => {
                            if y == 0.0 {
                                return Err(DomainFault { op: "div" });
                            }
                            x / y
                        }
                        BinaryOp::Pow => {
                            if x <= 0.0 {
                                return Err(DomainFault { op: "pow" });
                            }
                            x.powf(y)
                        }
                    }
                }
                Op::PowInt(c, e) => {
                    let x = vals[c];
                    if e < 0 && x == 0.0 {
                        return Err(DomainFault { op: "pow" });
                    }
                    x.powi(e)
                }
                Op::PowConst(c, e) => {
                    let x = vals[c];
                    if x <= 0.0 {
                        return Err(DomainFault { op: "pow" });
                    }
                    x.powf(e)
                }
            };
        }
        Ok(*vals.last().unwrap_or(&0.0))
    }

    /// Value of the kernel at one record.
    pub(crate) fn value(
        &self,
        table: &DataTable,
        record: usize,
        scratch: &mut Scratch,
    ) -> Result<f64, DomainFault> {
        if self.ops.is_empty() {
            return Ok(0.0);
        }
        self.forward(table, record, &scratch.local, &mut scratch.vals, false)
    }

    /// Fills `scratch.partials` with first and second partials of every
    /// node with respect to its children.
    fn partials(&self, scratch: &mut Scratch) {
        let vals = &scratch.vals;
        for (n, op) in self.ops.iter().enumerate() {
            scratch.partials[n] = match *op {
                Op::Const(_) | Op::Field(_) | Op::Var(_) => [0.0; 5],
                Op::Unary(u, c) => {
                    let x = vals[c];
                    let v = vals[n];
                    let (d, dd) = match u {
                        UnaryOp::Neg => (-1.0, 0.0),
                        UnaryOp::Sin => (x.cos(), -v),
                        UnaryOp::Cos => (-x.sin(), -v),
                        UnaryOp::Exp => (v, v),
                        UnaryOp::Log => (1.0 / x, -1.0 / (x * x)),
                        UnaryOp::Sqrt => (0.5 / v, -0.25 / (v * x)),
                    };
                    [d, dd, 0.0, 0.0, 0.0]
                }
                Op::Binary(b, l, r) => {
                    let (x, y) = (vals[l], vals[r]);
                    match b {
                        BinaryOp::Add => [1.0, 1.0, 0.0, 0.0, 0.0],
                        BinaryOp::Sub => [1.0, -1.0, 0.0, 0.0, 0.0],
                        BinaryOp::Mul => [y, x, 0.0, 1.0, 0.0],
                        BinaryOp::Div => {
                            let inv = 1.0 / y;
                            let inv2 = inv * inv;
                            [inv, -x * inv2, 0.0, -inv2, 2.0 * x * inv2 * inv]
                        }
                        BinaryOp::Pow => {
                            let v = vals[n];
                            let lx = x.ln();
                            let xm1 = x.powf(y - 1.0);
                            [
                                y * xm1,
                                v * lx,
                                y * (y - 1.0) * x.powf(y - 2.0),
                                xm1 * (1.0 + y * lx),
                                v * lx * lx,
                            ]
                        }
                    }
                }
                Op::PowInt(c, e) => {
                    let x = vals[c];
                    let (d, dd) = match e {
                        0 => (0.0, 0.0),
                        1 => (1.0, 0.0),
                        2 => (2.0 * x, 2.0),
                        _ => {
                            let ef = e as f64;
                            (ef * x.powi(e - 1), ef * (ef - 1.0) * x.powi(e - 2))
                        }
                    };
                    [d, dd, 0.0, 0.0, 0.0]
                }
                Op::PowConst(c, e) => {
                    let x = vals[c];
                    [e * x.powf(e - 1.0), e * (e - 1.0) * x.powf(e - 2.0), 0.0, 0.0, 0.0]
                }
            };
        }
    }

    /// Value and local gradient (into `scratch.grad`).
    pub(crate) fn gradient(
        &self,
        table: &DataTable,
        record: usize,
        scratch: &mut Scratch,
    ) -> Result<f64, DomainFault> {
        scratch.grad.iter_mut().for_each(|g| *g = 0.0);
        if self.ops.is_empty() {
            return Ok(0.0);
        }
        let value = self.forward(table, record, &scratch.local, &mut scratch.vals, true)?;
        self.partials(scratch);
        self.reverse(scratch);
        Ok(value)
    }

    fn reverse(&self, scratch: &mut Scratch) {
        let adj = &mut scratch.adj;
        adj.iter_mut().for_each(|a| *a = 0.0);
        let last = self.ops.len() - 1;
        adj[last] = 1.0;
        for n in (0..self.ops.len()).rev() {
            let a = adj[n];
            let p = scratch.partials[n];
            match self.ops[n] {
                Op::Const(_) | Op::Field(_) => {}
                Op::Var(s) => scratch.grad[s] += a,
                Op::Unary(_, c) | Op::PowInt(c, _) | Op::PowConst(c, _) => adj[c] += a * p[0],
                Op::Binary(_, l, r) => {
                    adj[l] += a * p[0];
                    adj[r] += a * p[1];
                }
            }
        }
    }

    /// Value, local gradient, and dense local Hessian (row-major `k x k`,
    /// into `scratch.hess`) by forward-over-reverse with one seed per slot.
    pub(crate) fn hessian(
        &self,
        table: &DataTable,
        record: usize,
        scratch: &mut Scratch,
    ) -> Result<f64, DomainFault> {
        let value = self.gradient(table, record, scratch)?;
        let k = self.slots.len();
        scratch.hess.iter_mut().for_each(|h| *h = 0.0);
        if self.ops.is_empty() {
            return Ok(value);
        }
        for seed in 0..k {
            // Tangent sweep along e_seed.
            for n in 0..self.ops.len() {
                let p = scratch.partials[n];
                scratch.tan[n] = match self.ops[n] {
                    Op::Const(_) | Op::Field(_) => 0.0,
                    Op::Var(s) => {
                        if s == seed {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Op::Unary(_, c) | Op::PowInt(c, _) | Op::PowConst(c, _) => p[0] * scratch.tan[c],
                    Op::Binary(_, l, r) => p[0] * scratch.tan[l] + p[1] * scratch.tan[r],
                };
            }
            // Tangent of the adjoint sweep.
            let adjt = &mut scratch.adjt;
            adjt.iter_mut().for_each(|a| *a = 0.0);
            for n in (0..self.ops.len()).rev() {
                let a = scratch.adj[n];
                let at = adjt[n];
                let p = scratch.partials[n];
                match self.ops[n] {
                    Op::Const(_) | Op::Field(_) => {}
                    Op::Var(s) => scratch.hess[s * k + seed] += at,
                    Op::Unary(_, c) | Op::PowInt(c, _) | Op::PowConst(c, _) => {
                        adjt[c] += at * p[0] + a * p[1] * scratch.tan[c];
                    }
                    Op::Binary(_, l, r) => {
                        let (tl, tr) = (scratch.tan[l], scratch.tan[r]);
                        adjt[l] += at * p[0] + a * (p[2] * tl + p[3] * tr);
                        adjt[r] += at * p[1] + a * (p[3] * tl + p[4] * tr);
                    }
                }
            }
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{constant, field};

    fn var(i: &str) -> Expr {
        Expr::Var { block: 0, index: i.to_string() }
    }

    fn table() -> DataTable {
        DataTable::new(1)
            .with_real("c", vec![3.0])
            .unwrap()
            .with_index("a", vec![0])
            .unwrap()
            .with_index("b", vec![1])
            .unwrap()
    }

    fn eval_all(e: &Expr, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let t = table();
        let tape = TermTape::lower(e, &t).unwrap();
        let mut s = Scratch::for_tape(&tape);
        s.local.copy_from_slice(&x[..tape.num_locals()]);
        let v = tape.hessian(&t, 0, &mut s).unwrap();
        (v, s.grad.clone(), s.hess.clone())
    }

    #[test]
    fn product_rule_and_cross_hessian() {
        let (v, g, h) = eval_all(&(var("a") * var("b")), &[2.0, 3.0]);
        assert_eq!(v, 6.0);
        assert_eq!(g, vec![3.0, 2.0]);
        assert_eq!(h, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn repeated_slot_is_deduplicated() {
        let t = table();
        let tape = TermTape::lower(&(var("a") * var("a") + var("b")), &t).unwrap();
        assert_eq!(tape.num_locals(), 2);
    }

    #[test]
    fn field_and_integer_power() {
        // c * a^3 with c = 3
        let (v, g, h) = eval_all(&(field("c") * var("a").powi(3)), &[2.0]);
        assert_eq!(v, 24.0);
        assert_eq!(g, vec![36.0]);
        assert_eq!(h, vec![36.0]);
    }

    #[test]
    fn general_pow_second_partials() {
        // a^b at (2, 3): d/da = b a^(b-1) = 12, d/db = a^b ln a
        let (v, g, h) = eval_all(&var("a").pow(var("b")), &[2.0, 3.0]);
        let ln2 = 2f64.ln();
        assert!((v - 8.0).abs() < 1e-14);
        assert!((g[0] - 12.0).abs() < 1e-12);
        assert!((g[1] - 8.0 * ln2).abs() < 1e-12);
        assert!((h[0] - 12.0).abs() < 1e-12);
        assert!((h[1] - 4.0 * (1.0 + 3.0 * ln2)).abs() < 1e-12);
        assert!((h[3] - 8.0 * ln2 * ln2).abs() < 1e-12);
        assert_eq!(h[1], h[2]);
    }

    #[test]
    fn domain_faults() {
        let t = table();
        for (e, op) in [
            (var("a").ln(), "log"),
            ((var("a") - 1.0).sqrt(), "sqrt"),
            (constant(1.0) / var("a"), "div"),
            (var("a").pow(0.5), "pow"),
        ] {
            let tape = TermTape::lower(&e, &t).unwrap();
            let mut s = Scratch::for_tape(&tape);
            s.local[0] = 0.0;
            assert_eq!(tape.value(&t, 0, &mut s).unwrap_err().op, op);
        }
    }

    #[test]
    fn unknown_names() {
        let t = table();
        assert_eq!(TermTape::lower(&field("zz"), &t).unwrap_err(), LowerError::UnknownField("zz".into()));
        assert_eq!(TermTape::lower(&var("zz"), &t).unwrap_err(), LowerError::UnknownIndexField("zz".into()));
        // index fields are not real fields
        assert!(TermTape::lower(&field("a"), &t).is_err());
    }
}
