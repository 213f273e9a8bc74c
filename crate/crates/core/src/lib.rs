//! Nonlinear programs written as scalar kernels iterated over data tables.
//!
//! A [`ModelCore`] registers variable blocks and kernel blocks; compiling it
//! gives a [`CompiledModel`] that implements the [`Nlp`] callback contract
//! with exact sparse gradients, Jacobians, and Lagrangian Hessians. The
//! [`opf`] module builds AC optimal power flow models from MATPOWER cases
//! and [`ipm`] solves them.

pub mod autodiff;
pub mod cli;
pub mod expr;
pub mod ipm;
pub mod lv;
pub mod matpower;
pub mod model;
pub mod opf;
pub mod table;

pub use autodiff::{compress, BlockKind, Compressed, Nlp};
pub use expr::{constant, field, BinaryOp, Expr, ExpressionKernel, UnaryOp};
pub use model::{
    extract_solution, BlockValues, CompiledModel, ConstraintAugment, ConstraintBlock, Fill, ModelCore, ModelError,
    ObjectiveBlock, Shape, VariableBlock,
};
pub use table::DataTable;
