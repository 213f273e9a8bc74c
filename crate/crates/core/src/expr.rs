//! Scalar expression kernels.
//!
//! An [`Expr`] is the user-facing form of a kernel: a tree whose leaves are
//! constants, named real columns of the bound [`DataTable`](crate::DataTable),
//! and variable references `block[index_field]`. When a kernel is registered
//! with a [`ModelCore`](crate::ModelCore) its names are resolved against the
//! table schema and the tree is lowered into a [`TermTape`](crate::autodiff::TermTape).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unary node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

/// Binary node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// A kernel expression over one data record.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Constant(f64),
    /// A real column of the bound table.
    Field(String),
    /// `x[offset(block) + record[index]]`.
    Var { block: usize, index: String },
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Alias used where the kernel role matters more than the tree.
pub type ExpressionKernel = Expr;

pub fn constant(value: f64) -> Expr {
    Expr::Constant(value)
}

pub fn field(name: &str) -> Expr {
    Expr::Field(name.to_string())
}

impl Expr {
    fn unary(self, op: UnaryOp) -> Expr {
        Expr::Unary(op, Box::new(self))
    }

    fn binary(self, op: BinaryOp, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(self), Box::new(rhs))
    }

    pub fn sin(self) -> Expr {
        self.unary(UnaryOp::Sin)
    }

    pub fn cos(self) -> Expr {
        self.unary(UnaryOp::Cos)
    }

    pub fn exp(self) -> Expr {
        self.unary(UnaryOp::Exp)
    }

    /// Natural logarithm.
    pub fn ln(self) -> Expr {
        self.unary(UnaryOp::Log)
    }

    pub fn sqrt(self) -> Expr {
        self.unary(UnaryOp::Sqrt)
    }

    /// Integer power; lowered to the fast repeated-multiplication path.
    pub fn powi(self, n: i32) -> Expr {
        self.binary(BinaryOp::Pow, Expr::Constant(n as f64))
    }

    pub fn pow(self, exponent: impl Into<Expr>) -> Expr {
        self.binary(BinaryOp::Pow, exponent.into())
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Constant(_) | Expr::Field(_) | Expr::Var { .. } => 1,
            Expr::Unary(_, c) => 1 + c.size(),
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
        }
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Constant(v)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.unary(UnaryOp::Neg)
    }
}

macro_rules! binary_ops {
    ($($trait:ident $method:ident $op:ident),*) => {$(
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                self.binary(BinaryOp::$op, rhs)
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                self.binary(BinaryOp::$op, Expr::Constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::Constant(self).binary(BinaryOp::$op, rhs)
            }
        }
    )*};
}

binary_ops!(Add add Add, Sub sub Sub, Mul mul Mul, Div div Div);
