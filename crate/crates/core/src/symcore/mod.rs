//! Symbolic expression algebra with on-the-way atomization.
//!
//! Every arithmetic operation goes through [`Model`], which interns the
//! result in an append-only atom table: structurally identical
//! sub-expressions always resolve to the same atom. Differentiation and
//! substitution run directly on the atomized DAG, and [`Tape`]s compile a
//! set of outputs to straight-line code for numeric evaluation.

mod diff;
mod expr;
mod tape;

pub use expr::{AtomId, BinOp, Expr, Model, Node, Operand, Symbol, SymbolId, SymbolKind, UnaryFn};
pub use tape::{EvalStatus, Instr, OutSlot, Src, Tape, TapeRunner, TapeStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymError {
    #[error("symbol `{0}` is already registered")]
    DuplicateSymbol(String),
    #[error("division by literal zero")]
    DivisionByZero,
    #[error("square root of negative literal {0}")]
    SqrtOfNegative(f64),
    #[error("no time-derivative symbol registered for `{0}`")]
    MissingRate(String),
    #[error("tape `{tape}` has free symbols not listed as inputs: {symbols:?}")]
    FreeSymbols { tape: String, symbols: Vec<String> },
}
